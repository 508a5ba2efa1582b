#include "flowcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "flowcast/util.hpp"

namespace flowcast {

template <typename S>
void adam_step(std::vector<S>& params, const std::vector<S>& grad, AdamState<S>& state,
               const AdamConfig& cfg) {
  if (params.size() != grad.size()) throw std::invalid_argument("param/grad size mismatch");
  if (state.m.empty() && state.v.empty() && state.step == 0) {
    state.m.assign(params.size(), S(0));
    state.v.assign(params.size(), S(0));
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("optimizer state does not match parameters");
  }
  state.step += 1;
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    double g = static_cast<double>(grad[i]);
    if (!cfg.decoupled_decay) g += cfg.weight_decay * static_cast<double>(params[i]);
    const double m = b1 * static_cast<double>(state.m[i]) + (1.0 - b1) * g;
    const double v = b2 * static_cast<double>(state.v[i]) + (1.0 - b2) * g * g;
    state.m[i] = static_cast<S>(m);
    state.v[i] = static_cast<S>(v);
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    double p = static_cast<double>(params[i]) - cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    if (cfg.decoupled_decay) p -= cfg.lr * cfg.weight_decay * static_cast<double>(params[i]);
    params[i] = static_cast<S>(p);
  }
}

template void adam_step<float>(std::vector<float>&, const std::vector<float>&,
                               AdamState<float>&, const AdamConfig&);
template void adam_step<double>(std::vector<double>&, const std::vector<double>&,
                                AdamState<double>&, const AdamConfig&);

namespace {

// Dataset-mean loss accumulated from per-batch means.
template <typename S>
double eval_loss(const Net<S>& net, const FlowStackProvider& provider,
                 std::span<const Sample> samples, int batch_size) {
  CompensatedSum total;
  size_t done = 0;
  while (done < samples.size()) {
    const size_t n = std::min(static_cast<size_t>(batch_size), samples.size() - done);
    std::vector<FlowStack> inputs;
    std::vector<Residual> targets;
    inputs.reserve(n);
    targets.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      inputs.push_back(provider.get(samples[done + i]));
      targets.push_back(samples[done + i].target);
    }
    const double batch_loss = static_cast<double>(net.loss(inputs, targets));
    total.add(batch_loss * static_cast<double>(n));
    done += n;
  }
  return total.value() / static_cast<double>(samples.size());
}

}  // namespace

template <typename S>
TrainResult train(Net<S>& net, const FlowStackProvider& provider,
                  std::span<const Sample> train_samples,
                  std::span<const Sample> val_samples, const TrainConfig& cfg) {
  if (train_samples.empty()) throw std::invalid_argument("empty training manifest");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1) {
    throw std::invalid_argument("train config fields must be positive");
  }
  TrainResult result;
  AdamConfig adam = cfg.adam;
  AdamState<S> state;
  std::vector<S> grad;

  std::vector<size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, "shuffle"));
  const uint64_t crop_base = mix_seed(cfg.seed, "crop");

  double best = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  int phase = 0;  // 0 = initial lr, 1 = dropped lr

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    CompensatedSum epoch_loss;
    size_t done = 0;
    while (done < order.size()) {
      const size_t n = std::min(static_cast<size_t>(cfg.batch_size), order.size() - done);
      std::vector<FlowStack> inputs;
      std::vector<Residual> targets;
      inputs.reserve(n);
      targets.reserve(n);
      for (size_t i = 0; i < n; ++i) {
        const Sample& s = train_samples[order[done + i]];
        if (cfg.random_crop) {
          inputs.push_back(provider.get(
              s, mix_seed(mix_seed(crop_base, static_cast<uint64_t>(epoch)), order[done + i])));
        } else {
          inputs.push_back(provider.get(s));
        }
        targets.push_back(s.target);
      }
      const S batch_loss = net.loss_and_grad(inputs, targets, grad);
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw std::runtime_error("training loss diverged (non-finite)");
      }
      adam_step(net.params(), grad, state, adam);
      epoch_loss.add(static_cast<double>(batch_loss) * static_cast<double>(n));
      done += n;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss.value() / static_cast<double>(order.size());
    stats.lr = adam.lr;
    stats.val_loss = val_samples.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : eval_loss(net, provider, val_samples, cfg.batch_size);
    result.history.push_back(stats);

    const double monitored = val_samples.empty() ? stats.train_loss : stats.val_loss;
    if (monitored < best - cfg.min_delta) {
      best = monitored;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
    if (since_improvement >= cfg.patience) {
      if (phase == 0) {
        adam.lr = cfg.lr_after_drop;
        phase = 1;
        result.lr_drops += 1;
        since_improvement = 0;
      } else {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

template TrainResult train<float>(Net<float>&, const FlowStackProvider&,
                                  std::span<const Sample>, std::span<const Sample>,
                                  const TrainConfig&);
template TrainResult train<double>(Net<double>&, const FlowStackProvider&,
                                   std::span<const Sample>, std::span<const Sample>,
                                   const TrainConfig&);

std::string history_csv(std::span<const EpochStats> history) {
  std::string out = "epoch,split,loss,lr\n";
  char buf[128];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof(buf), "%d,train,%.10g,%.10g\n", e.epoch, e.train_loss, e.lr);
    out += buf;
    if (!std::isnan(e.val_loss)) {
      std::snprintf(buf, sizeof(buf), "%d,val,%.10g,%.10g\n", e.epoch, e.val_loss, e.lr);
      out += buf;
    }
  }
  return out;
}

void write_history_csv(const std::filesystem::path& path, std::span<const EpochStats> history) {
  write_file_atomic(path, history_csv(history));
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  if (h <= 0.0) throw std::invalid_argument("step size must be positive");
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double grad_check(const NetSpec& spec, uint64_t seed, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  Net<double> net(spec, mix_seed(seed, "net"), /*zero_head=*/false);

  std::mt19937_64 rng(mix_seed(seed, "data"));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const size_t batch = 2;
  std::vector<FlowStack> inputs(batch);
  std::vector<Residual> targets(batch);
  for (size_t s = 0; s < batch; ++s) {
    FlowStack& st = inputs[s];
    st.channels = spec.input_channels;
    st.height = st.width = spec.input_side;
    st.data.resize(static_cast<size_t>(st.channels) * st.height * st.width);
    for (float& v : st.data) v = static_cast<float>(unif(rng));
    targets[s].resize(static_cast<size_t>(spec.horizon));
    for (auto& o : targets[s]) o = {unif(rng), unif(rng)};
  }

  std::vector<double> analytic;
  net.loss_and_grad(inputs, targets, analytic);

  std::vector<size_t> indices(net.param_count());
  std::iota(indices.begin(), indices.end(), 0);
  constexpr size_t kMaxChecked = 2048;
  if (indices.size() > kMaxChecked) {
    std::mt19937_64 pick(mix_seed(seed, "subset"));
    std::shuffle(indices.begin(), indices.end(), pick);
    indices.resize(kMaxChecked);
  }

  double max_rel = 0.0;
  for (size_t i : indices) {
    const double saved = net.params()[i];
    net.params()[i] = saved + epsilon;
    const double up = static_cast<double>(net.loss(inputs, targets));
    net.params()[i] = saved - epsilon;
    const double down = static_cast<double>(net.loss(inputs, targets));
    net.params()[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace flowcast
