#include "flowcast/experiment.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "flowcast/errors.hpp"

namespace flowcast {

std::vector<std::string> manifest_videos(const Manifest& manifest) {
  std::set<std::string> ids;
  for (const Sample& s : manifest.samples) ids.insert(s.video_id);
  return {ids.begin(), ids.end()};
}

std::vector<std::vector<Centroid>> truth_of(std::span<const Sample> samples) {
  std::vector<std::vector<Centroid>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.truth);
  return out;
}

std::vector<std::vector<Centroid>> cv_predictions(std::span<const Sample> samples) {
  std::vector<std::vector<Centroid>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.cv_pred);
  return out;
}

std::vector<std::vector<Centroid>> ca_predictions(std::span<const Sample> samples,
                                                  int velocity_window) {
  std::vector<std::vector<Centroid>> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    const int horizon = static_cast<int>(s.truth.size());
    out.push_back(ca_forecast(s.past, velocity_window, horizon));
  }
  return out;
}

std::vector<std::vector<Centroid>> model_predictions(const AnyNet& net,
                                                     const FlowStackProvider& provider,
                                                     std::span<const Sample> samples) {
  std::vector<std::vector<Centroid>> out;
  out.reserve(samples.size());
  std::visit([&](const auto& n) {
    for (const Sample& s : samples) {
      const Residual correction = n.predict(provider.get(s));
      out.push_back(recover_locations(s.cv_pred, correction));
    }
  }, net);
  return out;
}

TrainResult train_any(AnyNet& net, const FlowStackProvider& provider,
                      std::span<const Sample> train_samples,
                      std::span<const Sample> val_samples, const TrainConfig& cfg) {
  return std::visit(
      [&](auto& n) { return train(n, provider, train_samples, val_samples, cfg); }, net);
}

EvalReport evaluate_folds(const Manifest& manifest, const FlowStackProvider& provider,
                          const std::vector<std::vector<std::string>>& folds,
                          const AnyNet* net, int velocity_window, MseMode mode,
                          const std::string& label) {
  if (folds.empty()) throw std::invalid_argument("no folds to evaluate");
  std::vector<MetricSet> cv_folds, ca_folds, model_folds;
  for (const auto& videos : folds) {
    const std::vector<Sample> samples = select_samples(manifest.samples, videos);
    if (samples.empty()) throw DataError("a fold has no evaluable samples");
    const auto truths = truth_of(samples);
    cv_folds.push_back(compute_metrics(cv_predictions(samples), truths, mode));
    ca_folds.push_back(compute_metrics(ca_predictions(samples, velocity_window), truths, mode));
    if (net) {
      model_folds.push_back(
          compute_metrics(model_predictions(*net, provider, samples), truths, mode));
    }
  }
  EvalReport report;
  report.label = label;
  append_model_rows(report, "cv", cv_folds);
  append_model_rows(report, "ca", ca_folds);
  if (net) append_model_rows(report, "model", model_folds);
  return report;
}

}  // namespace flowcast
