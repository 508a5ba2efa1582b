#pragma once

#include <filesystem>
#include <string>

#include "flowcast/annotator.hpp"
#include "flowcast/dataset.hpp"
#include "flowcast/eval.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/net.hpp"
#include "flowcast/synth.hpp"
#include "flowcast/train.hpp"
#include "flowcast/trajectory.hpp"

namespace flowcast {

// Everything a run needs, declared in one INI-style file with a section per
// module. Parsing is strict: unknown sections or keys and malformed values
// raise ConfigError naming the offender. Command-line flags override keys.
struct ExperimentConfig {
  ForecastConfig forecast;
  PreprocessConfig preprocess;
  TrackerConfig tracker;
  FilterConfig filter;

  std::vector<ConvSpec> convs = {{8, 3, 2}, {16, 3, 2}};
  Precision precision = Precision::f32;
  uint64_t net_seed = 0;

  TrainConfig train;

  MseMode mse_mode = MseMode::euclidean;
  int folds = 5;
  uint64_t fold_seed = 0;

  SplitSpec split;
  SuiteConfig synth;

  double pretrain_fraction = 1.0;

  // Derived architecture: 2 channels per stacked field, square crop input.
  NetSpec net_spec() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

// Sets one key; `where` is "section.key". Used by the parser and by
// command-line overrides ("--set section.key=value").
void set_config_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
                    const std::string& value);
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Canonical rendering of every setting; parses back to an equal config.
std::string resolved_config(const ExperimentConfig& cfg);

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);
std::string to_string(MseMode m);
MseMode mse_mode_from_string(const std::string& s);
std::string convs_to_string(const std::vector<ConvSpec>& convs);
std::vector<ConvSpec> convs_from_string(const std::string& s);

}  // namespace flowcast
