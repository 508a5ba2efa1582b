#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/net.hpp"

namespace flowcast {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
  // false: decay folded into the gradient (L2 regularization);
  // true: decay applied directly to the parameters after the moment update.
  bool decoupled_decay = false;
};

template <typename S>
struct AdamState {
  int64_t step = 0;
  std::vector<S> m, v;
};

// One bias-corrected Adam update in place. The state is lazily sized on the
// first call and must keep matching the parameter vector afterwards.
template <typename S>
void adam_step(std::vector<S>& params, const std::vector<S>& grad, AdamState<S>& state,
               const AdamConfig& cfg);

struct TrainConfig {
  AdamConfig adam;             // adam.lr is the initial learning rate
  double lr_after_drop = 1e-6; // rate once validation loss saturates
  int patience = 5;            // epochs without improvement before reacting
  double min_delta = 0.0;      // required improvement to reset patience
  int batch_size = 64;
  int max_epochs = 100;
  uint64_t seed = 0;
  bool random_crop = true;     // train-time crop augmentation
};

struct EpochStats {
  int epoch = 0;       // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation split
  double lr = 0.0;        // rate in effect during this epoch
};

struct TrainResult {
  std::vector<EpochStats> history;
  int lr_drops = 0;
  bool stopped_early = false;
};

// Seeded-shuffle minibatch training. Validation loss (train loss when no
// validation samples are given) is monitored with `patience`: the first
// saturation drops the learning rate to lr_after_drop, the second stops.
template <typename S>
TrainResult train(Net<S>& net, const FlowStackProvider& provider,
                  std::span<const Sample> train_samples,
                  std::span<const Sample> val_samples, const TrainConfig& cfg);

extern template TrainResult train<float>(Net<float>&, const FlowStackProvider&,
                                         std::span<const Sample>, std::span<const Sample>,
                                         const TrainConfig&);
extern template TrainResult train<double>(Net<double>&, const FlowStackProvider&,
                                          std::span<const Sample>, std::span<const Sample>,
                                          const TrainConfig&);

std::string history_csv(std::span<const EpochStats> history);
void write_history_csv(const std::filesystem::path& path, std::span<const EpochStats> history);

// (f(x+h) - f(x-h)) / 2h; truncation error is O(h^2) for smooth f.
double central_difference(const std::function<double(double)>& f, double x, double h);

// Builds a randomly initialised 64-bit network (random head so conv gradients
// are non-degenerate) on random data, then compares analytic gradients with
// central differences parameter by parameter. Returns the maximum relative
// error; large parameter vectors are spot-checked on a seeded subset.
double grad_check(const NetSpec& spec, uint64_t seed, double epsilon = 1e-5);

}  // namespace flowcast
