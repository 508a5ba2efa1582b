#pragma once

#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/eval.hpp"
#include "flowcast/net.hpp"
#include "flowcast/train.hpp"

namespace flowcast {

std::vector<std::string> manifest_videos(const Manifest& manifest);

std::vector<std::vector<Centroid>> truth_of(std::span<const Sample> samples);
std::vector<std::vector<Centroid>> cv_predictions(std::span<const Sample> samples);
std::vector<std::vector<Centroid>> ca_predictions(std::span<const Sample> samples,
                                                  int velocity_window);

// Model predictions: correction from the network (center crop) added back to
// the stored constant-velocity forecast.
std::vector<std::vector<Centroid>> model_predictions(const AnyNet& net,
                                                     const FlowStackProvider& provider,
                                                     std::span<const Sample> samples);

TrainResult train_any(AnyNet& net, const FlowStackProvider& provider,
                      std::span<const Sample> train_samples,
                      std::span<const Sample> val_samples, const TrainConfig& cfg);

// Evaluates both kinematic baselines (and the model when given) on each fold's
// samples, then aggregates across folds. Every fold must contribute samples.
EvalReport evaluate_folds(const Manifest& manifest, const FlowStackProvider& provider,
                          const std::vector<std::vector<std::string>>& folds,
                          const AnyNet* net, int velocity_window, MseMode mode,
                          const std::string& label);

}  // namespace flowcast
