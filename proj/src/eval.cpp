#include "flowcast/eval.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "flowcast/util.hpp"

namespace flowcast {

namespace {

void check_aligned(std::span<const std::vector<Centroid>> predictions,
                   std::span<const std::vector<Centroid>> truths) {
  if (predictions.empty()) throw std::invalid_argument("no samples to evaluate");
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("prediction/truth sample counts differ");
  }
  const size_t n = predictions.front().size();
  if (n == 0) throw std::invalid_argument("empty horizon");
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].size() != n || truths[i].size() != n) {
      throw std::invalid_argument("prediction/truth horizon lengths differ");
    }
  }
}

}  // namespace

double mse_metric(std::span<const std::vector<Centroid>> predictions,
                  std::span<const std::vector<Centroid>> truths, MseMode mode) {
  check_aligned(predictions, truths);
  const size_t n = predictions.front().size();
  CompensatedSum sum;
  for (size_t i = 0; i < predictions.size(); ++i) {
    for (size_t k = 0; k < n; ++k) {
      const double dx = predictions[i][k].x - truths[i][k].x;
      const double dy = predictions[i][k].y - truths[i][k].y;
      sum.add(dx * dx + dy * dy);
    }
  }
  const double denom = static_cast<double>(predictions.size() * n);
  const double mse = sum.value() / denom;
  return mode == MseMode::euclidean ? mse : mse / 2.0;
}

double de_at(std::span<const std::vector<Centroid>> predictions,
             std::span<const std::vector<Centroid>> truths, int t) {
  check_aligned(predictions, truths);
  const size_t n = predictions.front().size();
  if (t < 1 || static_cast<size_t>(t) > n) throw std::invalid_argument("horizon step out of range");
  const size_t k = static_cast<size_t>(t - 1);
  CompensatedSum sum;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const double dx = predictions[i][k].x - truths[i][k].x;
    const double dy = predictions[i][k].y - truths[i][k].y;
    sum.add(std::hypot(dx, dy));
  }
  return sum.value() / static_cast<double>(predictions.size());
}

MetricSet compute_metrics(std::span<const std::vector<Centroid>> predictions,
                          std::span<const std::vector<Centroid>> truths, MseMode mode) {
  MetricSet out;
  out.mse = mse_metric(predictions, truths, mode);
  const int n = static_cast<int>(predictions.front().size());
  out.de.reserve(static_cast<size_t>(n));
  for (int t = 1; t <= n; ++t) out.de.push_back(de_at(predictions, truths, t));
  return out;
}

FoldAggregate aggregate_folds(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("need at least two fold values");
  const auto k = static_cast<double>(values.size());
  CompensatedSum sum;
  for (double v : values) sum.add(v);
  const double mean = sum.value() / k;
  CompensatedSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  const double variance = sq.value() / (k - 1.0);
  const double stddev = std::sqrt(variance);
  const boost::math::students_t dist(k - 1.0);
  const double t = boost::math::quantile(dist, 0.975);
  FoldAggregate out;
  out.mean = mean;
  out.half_width = t * stddev / std::sqrt(k);
  out.folds = static_cast<int>(values.size());
  return out;
}

std::string format_ci(double mean, double half_width) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.6g ± %.6g", mean, half_width);
  return buf;
}

std::string format_ci(const FoldAggregate& agg) { return format_ci(agg.mean, agg.half_width); }

void append_model_rows(EvalReport& report, const std::string& model,
                       std::span<const MetricSet> per_fold) {
  if (per_fold.empty()) throw std::invalid_argument("no folds to report");
  const size_t n = per_fold.front().de.size();
  for (const MetricSet& m : per_fold) {
    if (m.de.size() != n) throw std::invalid_argument("fold horizon mismatch");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto metric_name = [](size_t t) { return "de@" + std::to_string(t + 1); };

  for (size_t f = 0; f < per_fold.size(); ++f) {
    report.rows.push_back({model, "mse", std::to_string(f), per_fold[f].mse, nan, ""});
    for (size_t t = 0; t < n; ++t) {
      report.rows.push_back({model, metric_name(t), std::to_string(f), per_fold[f].de[t], nan, ""});
    }
  }
  if (per_fold.size() >= 2) {
    std::vector<double> vals(per_fold.size());
    for (size_t f = 0; f < per_fold.size(); ++f) vals[f] = per_fold[f].mse;
    FoldAggregate agg = aggregate_folds(vals);
    report.rows.push_back({model, "mse", "all", agg.mean, agg.half_width, format_ci(agg)});
    for (size_t t = 0; t < n; ++t) {
      for (size_t f = 0; f < per_fold.size(); ++f) vals[f] = per_fold[f].de[t];
      agg = aggregate_folds(vals);
      report.rows.push_back({model, metric_name(t), "all", agg.mean, agg.half_width, format_ci(agg)});
    }
  }
  report.horizon = static_cast<int>(n);
}

std::string report_csv(const EvalReport& report) {
  std::string out = "model,metric,fold,value,ci95,display\n";
  char buf[256];
  for (const EvalRow& r : report.rows) {
    if (std::isnan(r.ci95)) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.10g,,\n", r.model.c_str(), r.metric.c_str(),
                    r.fold.c_str(), r.value);
    } else {
      std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.10g,%.10g,%s\n", r.model.c_str(),
                    r.metric.c_str(), r.fold.c_str(), r.value, r.ci95, r.display.c_str());
    }
    out += buf;
  }
  return out;
}

std::string report_json(const EvalReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const EvalRow& r : report.rows) {
    nlohmann::json j = {{"model", r.model}, {"metric", r.metric}, {"fold", r.fold},
                        {"value", r.value}};
    if (!std::isnan(r.ci95)) {
      j["ci95"] = r.ci95;
      j["display"] = r.display;
    }
    rows.push_back(std::move(j));
  }
  nlohmann::json doc = {{"label", report.label}, {"horizon", report.horizon}, {"rows", rows}};
  return doc.dump(2) + "\n";
}

}  // namespace flowcast
