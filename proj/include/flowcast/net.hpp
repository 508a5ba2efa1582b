#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include "flowcast/flow.hpp"
#include "flowcast/trajectory.hpp"

namespace flowcast {

struct ConvSpec {
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  bool operator==(const ConvSpec&) const = default;
};

// Architecture descriptor. The network maps a planar flow stack to 2*horizon
// numbers, the interleaved (dx, dy) corrections for each future step.
struct NetSpec {
  int input_channels = 18;
  int input_side = 224;
  std::vector<ConvSpec> convs = {{8, 3, 2}, {16, 3, 2}};
  int horizon = 15;

  bool operator==(const NetSpec&) const = default;
  int output_dim() const { return 2 * horizon; }
  void validate() const;  // throws std::invalid_argument on impossible shapes
};

enum class Precision { f32, f64 };

// Plain convolutional regressor: valid (unpadded) strided convolutions with
// ReLU, global average pooling, then an affine head. A zero-initialised head
// outputs exactly zero, so an untrained model reproduces the constant-velocity
// baseline once its output is added back to it.
template <typename S>
class Net {
 public:
  Net() = default;
  Net(const NetSpec& spec, uint64_t seed, bool zero_head = true);

  const NetSpec& spec() const { return spec_; }
  std::vector<S>& params() { return params_; }
  const std::vector<S>& params() const { return params_; }
  size_t param_count() const { return params_.size(); }

  std::vector<S> forward(const FlowStack& input) const;
  Residual predict(const FlowStack& input) const;

  // Mean of squared errors over batch * output_dim entries; writes dloss/dparam.
  S loss_and_grad(std::span<const FlowStack> inputs, std::span<const Residual> targets,
                  std::vector<S>& grad) const;
  S loss(std::span<const FlowStack> inputs, std::span<const Residual> targets) const;

 private:
  struct ConvDims {
    int c_in, c_out, kernel, stride, in_side, out_side;
    size_t w_off, b_off;
  };
  struct Plan {
    std::vector<ConvDims> convs;
    int feat_dim = 0;
    int out_dim = 0;
    size_t head_w_off = 0, head_b_off = 0;
    size_t total = 0;
  };
  static Plan make_plan(const NetSpec& spec);
  void check_input(const FlowStack& input) const;

  NetSpec spec_;
  Plan plan_;
  std::vector<S> params_;
};

extern template class Net<float>;
extern template class Net<double>;

using AnyNet = std::variant<Net<float>, Net<double>>;

Precision net_precision(const AnyNet& net);
const NetSpec& net_spec(const AnyNet& net);

// Binary checkpoint: magic, format version, element width, architecture,
// raw parameter payload, CRC32 trailer. Loading restores the exact bit
// pattern of every parameter.
void save_checkpoint(const std::filesystem::path& path, const AnyNet& net);
AnyNet load_checkpoint(const std::filesystem::path& path);

}  // namespace flowcast
