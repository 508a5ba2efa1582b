#pragma once

#include <span>
#include <string>
#include <vector>

#include "flowcast/trajectory.hpp"

namespace flowcast {

// MSE convention: squared Euclidean distance per (sample, timestep) by
// default; per_coordinate averages over the two axes as well (exactly half).
enum class MseMode { euclidean, per_coordinate };

double mse_metric(std::span<const std::vector<Centroid>> predictions,
                  std::span<const std::vector<Centroid>> truths,
                  MseMode mode = MseMode::euclidean);

// Mean Euclidean distance at horizon step t (1-based).
double de_at(std::span<const std::vector<Centroid>> predictions,
             std::span<const std::vector<Centroid>> truths, int t);

struct MetricSet {
  double mse = 0.0;
  std::vector<double> de;  // de[k] is DE@(k+1)
};

MetricSet compute_metrics(std::span<const std::vector<Centroid>> predictions,
                          std::span<const std::vector<Centroid>> truths,
                          MseMode mode = MseMode::euclidean);

struct FoldAggregate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% CI via Student-t with folds-1 dof
  int folds = 0;
};

FoldAggregate aggregate_folds(std::span<const double> values);

// "mean ± hw", six significant digits each.
std::string format_ci(const FoldAggregate& agg);
std::string format_ci(double mean, double half_width);

// One row per (model, metric, fold); aggregate rows use fold "all" and carry
// the CI half-width and display string.
struct EvalRow {
  std::string model;   // "cv", "ca", "model"
  std::string metric;  // "mse", "de@1" .. "de@n"
  std::string fold;    // fold index or "all"
  double value = 0.0;
  double ci95 = 0.0;   // NaN on per-fold rows
  std::string display; // non-empty on aggregate rows
};

struct EvalReport {
  std::string label;
  int horizon = 0;
  std::vector<EvalRow> rows;
};

// Appends per-fold rows and, with >= 2 folds, the aggregate rows for one model.
void append_model_rows(EvalReport& report, const std::string& model,
                       std::span<const MetricSet> per_fold);

std::string report_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);

}  // namespace flowcast
