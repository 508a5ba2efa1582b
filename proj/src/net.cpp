#include "flowcast/net.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

#include "flowcast/errors.hpp"
#include "flowcast/util.hpp"

namespace flowcast {

static_assert(std::endian::native == std::endian::little,
              "checkpoint serialization assumes a little-endian host");

void NetSpec::validate() const {
  if (input_channels < 1 || input_side < 1 || horizon < 1) {
    throw std::invalid_argument("net spec dimensions must be positive");
  }
  int side = input_side;
  for (const ConvSpec& c : convs) {
    if (c.out_channels < 1 || c.kernel < 1 || c.stride < 1) {
      throw std::invalid_argument("conv spec fields must be positive");
    }
    if (side < c.kernel) throw std::invalid_argument("conv kernel larger than its input");
    side = (side - c.kernel) / c.stride + 1;
  }
}

template <typename S>
typename Net<S>::Plan Net<S>::make_plan(const NetSpec& spec) {
  spec.validate();
  Plan plan;
  size_t off = 0;
  int side = spec.input_side;
  int channels = spec.input_channels;
  for (const ConvSpec& c : spec.convs) {
    ConvDims d;
    d.c_in = channels;
    d.c_out = c.out_channels;
    d.kernel = c.kernel;
    d.stride = c.stride;
    d.in_side = side;
    d.out_side = (side - c.kernel) / c.stride + 1;
    d.w_off = off;
    off += static_cast<size_t>(d.c_out) * d.c_in * d.kernel * d.kernel;
    d.b_off = off;
    off += static_cast<size_t>(d.c_out);
    plan.convs.push_back(d);
    side = d.out_side;
    channels = d.c_out;
  }
  plan.feat_dim = channels;
  plan.out_dim = spec.output_dim();
  plan.head_w_off = off;
  off += static_cast<size_t>(plan.out_dim) * plan.feat_dim;
  plan.head_b_off = off;
  off += static_cast<size_t>(plan.out_dim);
  plan.total = off;
  return plan;
}

template <typename S>
Net<S>::Net(const NetSpec& spec, uint64_t seed, bool zero_head)
    : spec_(spec), plan_(make_plan(spec)), params_(plan_.total, S(0)) {
  std::mt19937_64 rng(seed);
  for (const ConvDims& d : plan_.convs) {
    const double fan_in = static_cast<double>(d.c_in) * d.kernel * d.kernel;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    const size_t n = static_cast<size_t>(d.c_out) * d.c_in * d.kernel * d.kernel;
    for (size_t i = 0; i < n; ++i) params_[d.w_off + i] = static_cast<S>(dist(rng));
    // biases stay zero
  }
  if (!zero_head) {
    std::normal_distribution<double> dist(0.0, 0.01);
    const size_t n = static_cast<size_t>(plan_.out_dim) * plan_.feat_dim;
    for (size_t i = 0; i < n; ++i) params_[plan_.head_w_off + i] = static_cast<S>(dist(rng));
  }
}

template <typename S>
void Net<S>::check_input(const FlowStack& input) const {
  if (input.channels != spec_.input_channels || input.height != spec_.input_side ||
      input.width != spec_.input_side) {
    throw std::invalid_argument("input stack shape does not match the network");
  }
}

namespace {

void check_finite_batch(std::span<const FlowStack> inputs, std::span<const Residual> targets) {
  for (const FlowStack& in : inputs) {
    for (float v : in.data) {
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in input stack");
    }
  }
  for (const Residual& r : targets) {
    for (const Offset& o : r) {
      if (!std::isfinite(o.dx) || !std::isfinite(o.dy)) {
        throw std::invalid_argument("non-finite value in target");
      }
    }
  }
}

}  // namespace

namespace {

template <typename S>
void conv_forward(const S* in, int in_side, const S* w, const S* b, S* out, int c_in,
                  int c_out, int k, int stride, int out_side) {
  for (int oc = 0; oc < c_out; ++oc) {
    for (int oy = 0; oy < out_side; ++oy) {
      for (int ox = 0; ox < out_side; ++ox) {
        S acc = b[oc];
        for (int ic = 0; ic < c_in; ++ic) {
          const S* in_c = in + static_cast<size_t>(ic) * in_side * in_side;
          const S* w_c = w + ((static_cast<size_t>(oc) * c_in + ic) * k) * k;
          const int base_y = oy * stride;
          const int base_x = ox * stride;
          for (int ky = 0; ky < k; ++ky) {
            const S* row = in_c + static_cast<size_t>(base_y + ky) * in_side + base_x;
            const S* wr = w_c + static_cast<size_t>(ky) * k;
            for (int kx = 0; kx < k; ++kx) acc += wr[kx] * row[kx];
          }
        }
        out[(static_cast<size_t>(oc) * out_side + oy) * out_side + ox] =
            acc > S(0) ? acc : S(0);  // fused ReLU
      }
    }
  }
}

}  // namespace

template <typename S>
std::vector<S> Net<S>::forward(const FlowStack& input) const {
  check_input(input);
  std::vector<S> act(input.data.begin(), input.data.end());
  for (const ConvDims& d : plan_.convs) {
    std::vector<S> next(static_cast<size_t>(d.c_out) * d.out_side * d.out_side);
    conv_forward(act.data(), d.in_side, params_.data() + d.w_off, params_.data() + d.b_off,
                 next.data(), d.c_in, d.c_out, d.kernel, d.stride, d.out_side);
    act = std::move(next);
  }
  const int side = plan_.convs.empty() ? spec_.input_side : plan_.convs.back().out_side;
  const S inv_area = S(1) / static_cast<S>(side * side);
  std::vector<S> feat(static_cast<size_t>(plan_.feat_dim));
  for (int c = 0; c < plan_.feat_dim; ++c) {
    S acc = S(0);
    const S* a = act.data() + static_cast<size_t>(c) * side * side;
    for (int i = 0; i < side * side; ++i) acc += a[i];
    feat[static_cast<size_t>(c)] = acc * inv_area;
  }
  std::vector<S> out(static_cast<size_t>(plan_.out_dim));
  const S* hw = params_.data() + plan_.head_w_off;
  const S* hb = params_.data() + plan_.head_b_off;
  for (int d = 0; d < plan_.out_dim; ++d) {
    S acc = hb[d];
    const S* row = hw + static_cast<size_t>(d) * plan_.feat_dim;
    for (int c = 0; c < plan_.feat_dim; ++c) acc += row[c] * feat[static_cast<size_t>(c)];
    out[static_cast<size_t>(d)] = acc;
  }
  return out;
}

template <typename S>
Residual Net<S>::predict(const FlowStack& input) const {
  const std::vector<S> y = forward(input);
  Residual out(static_cast<size_t>(spec_.horizon));
  for (int k = 0; k < spec_.horizon; ++k) {
    out[static_cast<size_t>(k)] = {static_cast<double>(y[static_cast<size_t>(2 * k)]),
                                   static_cast<double>(y[static_cast<size_t>(2 * k + 1)])};
  }
  return out;
}

template <typename S>
S Net<S>::loss_and_grad(std::span<const FlowStack> inputs, std::span<const Residual> targets,
                        std::vector<S>& grad) const {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw std::invalid_argument("batch inputs and targets must align and be non-empty");
  }
  check_finite_batch(inputs, targets);
  grad.assign(plan_.total, S(0));
  const size_t batch = inputs.size();
  const S denom = static_cast<S>(batch) * static_cast<S>(plan_.out_dim);
  CompensatedSum loss_sum;

  const size_t n_layers = plan_.convs.size();
  std::vector<std::vector<S>> acts(n_layers + 1);

  for (size_t s = 0; s < batch; ++s) {
    check_input(inputs[s]);
    if (static_cast<int>(targets[s].size()) != spec_.horizon) {
      throw std::invalid_argument("target horizon does not match the network");
    }
    acts[0].assign(inputs[s].data.begin(), inputs[s].data.end());
    for (size_t l = 0; l < n_layers; ++l) {
      const ConvDims& d = plan_.convs[l];
      acts[l + 1].assign(static_cast<size_t>(d.c_out) * d.out_side * d.out_side, S(0));
      conv_forward(acts[l].data(), d.in_side, params_.data() + d.w_off,
                   params_.data() + d.b_off, acts[l + 1].data(), d.c_in, d.c_out, d.kernel,
                   d.stride, d.out_side);
    }
    const int side = plan_.convs.empty() ? spec_.input_side : plan_.convs.back().out_side;
    const S inv_area = S(1) / static_cast<S>(side * side);
    std::vector<S> feat(static_cast<size_t>(plan_.feat_dim));
    for (int c = 0; c < plan_.feat_dim; ++c) {
      S acc = S(0);
      const S* a = acts[n_layers].data() + static_cast<size_t>(c) * side * side;
      for (int i = 0; i < side * side; ++i) acc += a[i];
      feat[static_cast<size_t>(c)] = acc * inv_area;
    }
    const S* hw = params_.data() + plan_.head_w_off;
    const S* hb = params_.data() + plan_.head_b_off;
    std::vector<S> dy(static_cast<size_t>(plan_.out_dim));
    for (int d = 0; d < plan_.out_dim; ++d) {
      S acc = hb[d];
      const S* row = hw + static_cast<size_t>(d) * plan_.feat_dim;
      for (int c = 0; c < plan_.feat_dim; ++c) acc += row[c] * feat[static_cast<size_t>(c)];
      const int step = d / 2;
      const S target = static_cast<S>(
          d % 2 == 0 ? targets[s][static_cast<size_t>(step)].dx
                     : targets[s][static_cast<size_t>(step)].dy);
      const S err = acc - target;
      loss_sum.add(static_cast<double>(err) * static_cast<double>(err));
      dy[static_cast<size_t>(d)] = S(2) * err / denom;
    }

    // head backward
    std::vector<S> dfeat(static_cast<size_t>(plan_.feat_dim), S(0));
    for (int d = 0; d < plan_.out_dim; ++d) {
      const S g = dy[static_cast<size_t>(d)];
      S* gw = grad.data() + plan_.head_w_off + static_cast<size_t>(d) * plan_.feat_dim;
      const S* row = hw + static_cast<size_t>(d) * plan_.feat_dim;
      for (int c = 0; c < plan_.feat_dim; ++c) {
        gw[c] += g * feat[static_cast<size_t>(c)];
        dfeat[static_cast<size_t>(c)] += row[c] * g;
      }
      grad[plan_.head_b_off + static_cast<size_t>(d)] += g;
    }

    // pooling backward (uniform share), then conv layers in reverse
    std::vector<S> dact(acts[n_layers].size());
    for (int c = 0; c < plan_.feat_dim; ++c) {
      const S share = dfeat[static_cast<size_t>(c)] * inv_area;
      S* d = dact.data() + static_cast<size_t>(c) * side * side;
      for (int i = 0; i < side * side; ++i) d[i] = share;
    }

    for (size_t li = n_layers; li-- > 0;) {
      const ConvDims& d = plan_.convs[li];
      const std::vector<S>& out_act = acts[li + 1];
      const std::vector<S>& in_act = acts[li];
      std::vector<S> din;
      if (li > 0) din.assign(in_act.size(), S(0));
      S* gw = grad.data() + d.w_off;
      S* gb = grad.data() + d.b_off;
      const S* w = params_.data() + d.w_off;
      for (int oc = 0; oc < d.c_out; ++oc) {
        for (int oy = 0; oy < d.out_side; ++oy) {
          for (int ox = 0; ox < d.out_side; ++ox) {
            const size_t oi = (static_cast<size_t>(oc) * d.out_side + oy) * d.out_side + ox;
            if (out_act[oi] <= S(0)) continue;  // ReLU gate
            const S g = dact[oi];
            gb[oc] += g;
            const int base_y = oy * d.stride;
            const int base_x = ox * d.stride;
            for (int ic = 0; ic < d.c_in; ++ic) {
              const S* in_c = in_act.data() + static_cast<size_t>(ic) * d.in_side * d.in_side;
              S* gw_c = gw + ((static_cast<size_t>(oc) * d.c_in + ic) * d.kernel) * d.kernel;
              const S* w_c = w + ((static_cast<size_t>(oc) * d.c_in + ic) * d.kernel) * d.kernel;
              S* din_c =
                  li > 0 ? din.data() + static_cast<size_t>(ic) * d.in_side * d.in_side : nullptr;
              for (int ky = 0; ky < d.kernel; ++ky) {
                const size_t row = static_cast<size_t>(base_y + ky) * d.in_side + base_x;
                for (int kx = 0; kx < d.kernel; ++kx) {
                  gw_c[static_cast<size_t>(ky) * d.kernel + kx] += g * in_c[row + kx];
                  if (din_c) din_c[row + kx] += g * w_c[static_cast<size_t>(ky) * d.kernel + kx];
                }
              }
            }
          }
        }
      }
      if (li > 0) dact = std::move(din);
    }
  }
  return static_cast<S>(loss_sum.value() / static_cast<double>(denom));
}

template <typename S>
S Net<S>::loss(std::span<const FlowStack> inputs, std::span<const Residual> targets) const {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw std::invalid_argument("batch inputs and targets must align and be non-empty");
  }
  check_finite_batch(inputs, targets);
  CompensatedSum sum;
  for (size_t s = 0; s < inputs.size(); ++s) {
    if (static_cast<int>(targets[s].size()) != spec_.horizon) {
      throw std::invalid_argument("target horizon does not match the network");
    }
    const std::vector<S> y = forward(inputs[s]);
    for (int d = 0; d < plan_.out_dim; ++d) {
      const int step = d / 2;
      const double target = d % 2 == 0 ? targets[s][static_cast<size_t>(step)].dx
                                       : targets[s][static_cast<size_t>(step)].dy;
      const double err = static_cast<double>(y[static_cast<size_t>(d)]) - target;
      sum.add(err * err);
    }
  }
  return static_cast<S>(sum.value() /
                        (static_cast<double>(inputs.size()) * plan_.out_dim));
}

template class Net<float>;
template class Net<double>;

Precision net_precision(const AnyNet& net) {
  return std::holds_alternative<Net<float>>(net) ? Precision::f32 : Precision::f64;
}

const NetSpec& net_spec(const AnyNet& net) {
  return std::visit([](const auto& n) -> const NetSpec& { return n.spec(); }, net);
}

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'C', 'K', 'P', 'T'};
constexpr uint32_t kVersion = 1;

void append_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}
template <typename T>
void append_pod(std::string& out, T v) {
  append_bytes(out, &v, sizeof(v));
}

struct Cursor {
  const std::byte* p;
  size_t left;
  std::string path;
  void take(void* dst, size_t n) {
    if (left < n) throw DataError(path + ": checkpoint truncated");
    std::memcpy(dst, p, n);
    p += n;
    left -= n;
  }
  template <typename T>
  T pod() {
    T v;
    take(&v, sizeof(v));
    return v;
  }
};

template <typename S>
std::string payload_of(const Net<S>& net) {
  std::string out;
  append_bytes(out, net.params().data(), net.params().size() * sizeof(S));
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const AnyNet& net) {
  const NetSpec& spec = net_spec(net);
  std::string buf;
  append_bytes(buf, kMagic, sizeof(kMagic));
  append_pod(buf, kVersion);
  append_pod(buf, static_cast<uint8_t>(net_precision(net) == Precision::f32 ? 4 : 8));
  append_pod(buf, static_cast<int32_t>(spec.input_channels));
  append_pod(buf, static_cast<int32_t>(spec.input_side));
  append_pod(buf, static_cast<int32_t>(spec.horizon));
  append_pod(buf, static_cast<uint32_t>(spec.convs.size()));
  for (const ConvSpec& c : spec.convs) {
    append_pod(buf, static_cast<int32_t>(c.out_channels));
    append_pod(buf, static_cast<int32_t>(c.kernel));
    append_pod(buf, static_cast<int32_t>(c.stride));
  }
  const std::string payload =
      std::visit([](const auto& n) { return payload_of(n); }, net);
  append_pod(buf, static_cast<uint64_t>(
                      std::visit([](const auto& n) { return n.param_count(); }, net)));
  buf += payload;
  append_pod(buf, crc32(buf.data(), buf.size()));
  write_file_atomic(path, buf);
}

AnyNet load_checkpoint(const std::filesystem::path& path) {
  const std::vector<std::byte> buf = read_file_bytes(path);
  if (buf.size() < sizeof(kMagic) + sizeof(uint32_t)) {
    throw DataError(path.string() + ": checkpoint truncated");
  }
  const uint32_t stored_crc =
      [&] {
        uint32_t v;
        std::memcpy(&v, buf.data() + buf.size() - sizeof(uint32_t), sizeof(v));
        return v;
      }();
  if (crc32(buf.data(), buf.size() - sizeof(uint32_t)) != stored_crc) {
    throw DataError(path.string() + ": checkpoint corrupt (crc mismatch)");
  }
  Cursor cur{buf.data(), buf.size() - sizeof(uint32_t), path.string()};
  char magic[8];
  cur.take(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + ": not a checkpoint file");
  }
  if (cur.pod<uint32_t>() != kVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version");
  }
  const uint8_t width = cur.pod<uint8_t>();
  if (width != 4 && width != 8) {
    throw DataError(path.string() + ": unknown element width");
  }
  NetSpec spec;
  spec.input_channels = cur.pod<int32_t>();
  spec.input_side = cur.pod<int32_t>();
  spec.horizon = cur.pod<int32_t>();
  spec.convs.resize(cur.pod<uint32_t>());
  for (ConvSpec& c : spec.convs) {
    c.out_channels = cur.pod<int32_t>();
    c.kernel = cur.pod<int32_t>();
    c.stride = cur.pod<int32_t>();
  }
  const uint64_t count = cur.pod<uint64_t>();
  auto fill = [&](auto& net) {
    if (net.param_count() != count) {
      throw DataError(path.string() + ": parameter count does not match architecture");
    }
    using S = std::remove_reference_t<decltype(net.params()[0])>;
    if (cur.left != count * sizeof(S)) {
      throw DataError(path.string() + ": payload size mismatch");
    }
    cur.take(net.params().data(), cur.left);
  };
  try {
    if (width == 4) {
      Net<float> net(spec, 0);
      fill(net);
      return AnyNet(std::move(net));
    }
    Net<double> net(spec, 0);
    fill(net);
    return AnyNet(std::move(net));
  } catch (const std::invalid_argument& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace flowcast
