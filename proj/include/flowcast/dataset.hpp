#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowcast/flow.hpp"
#include "flowcast/trajectory.hpp"

namespace flowcast {

// One supervised example anchored at frame `anchor` of a track: the recent
// centroid history, the constant-velocity forecast, the ground-truth future,
// the signed correction between them, and the flow stack inputs (per-frame
// pedestrian boxes plus relative paths of the flow fields, oldest first).
struct Sample {
  std::string video_id;
  int64_t track_id = 0;
  int64_t anchor = 0;
  std::vector<Centroid> past;      // velocity_window + 1 centroids, ending at anchor
  std::vector<Centroid> cv_pred;   // horizon forecast locations
  std::vector<Centroid> truth;     // horizon ground-truth locations
  Residual target;                 // truth - cv_pred
  std::vector<BoundingBox> boxes;  // flow_stack boxes, frames anchor-flow_stack+1 .. anchor
  std::vector<std::string> flow_paths;  // matching "<video>/<frame>.flo", relative to flow root
};

struct Manifest {
  ForecastConfig forecast;
  TrackSource source = TrackSource::human;
  std::string flow_dir;  // informative; loaders take their own root
  std::vector<Sample> samples;
};

// Enumerates every valid anchor of every track. An anchor t is valid when the
// track covers t - max(flow_stack, velocity_window) .. t + horizon, noting the
// flow field for frame f encodes motion f-1 -> f.
Manifest build_samples(std::span<const Track> tracks, const std::string& flow_dir,
                       const ForecastConfig& cfg);

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

// --- video-level splits -----------------------------------------------------

// Trailing decimal digits of a video id ("video_0042" -> 42). Throws DataError
// when the id has no digit suffix.
int64_t video_number(const std::string& video_id);

enum class SplitMode { range, list, fraction };

struct SplitSpec {
  SplitMode mode = SplitMode::range;
  // range: inclusive bounds on video_number(). Every video must fall in
  // exactly one of the two intervals.
  int64_t train_lo = 0, train_hi = 250;
  int64_t eval_lo = 251, eval_hi = 346;
  // list: explicit membership; every video must appear in exactly one list.
  std::vector<std::string> train_videos, eval_videos;
  // fraction: seeded hash order, first round(train_fraction * N) go to train.
  double train_fraction = 0.8;
  uint64_t seed = 0;
};

struct Split {
  std::vector<std::string> train, eval;
};

Split split_videos(std::span<const std::string> videos, const SplitSpec& spec);

// K seeded-shuffle folds, assigned round-robin; every video lands in exactly
// one fold and fold sizes differ by at most one.
std::vector<std::vector<std::string>> make_folds(std::span<const std::string> videos,
                                                 int k, uint64_t seed);

// Deterministic nested prefixes: subset(f1) is contained in subset(f2) for
// f1 <= f2 under the same seed.
std::vector<std::string> subset_videos(std::span<const std::string> videos,
                                       double fraction, uint64_t seed);

// Keeps only samples whose video id is in `videos`.
std::vector<Sample> select_samples(std::span<const Sample> samples,
                                   std::span<const std::string> videos);

// --- flow stack loading -----------------------------------------------------

// Loads, crops, resizes, normalizes and stacks the flow inputs of a sample.
// Decoded files are cached by path so repeated epochs touch disk once.
class FlowStackProvider {
 public:
  FlowStackProvider(std::filesystem::path flow_root, PreprocessConfig cfg);

  FlowStack get(const Sample& sample) const;                     // center crop
  FlowStack get(const Sample& sample, uint64_t crop_seed) const; // random crop

  const PreprocessConfig& config() const { return cfg_; }

 private:
  const FlowField& load(const std::string& rel_path) const;
  FlowStack assemble(const Sample& sample, uint64_t crop_seed, bool random) const;

  std::filesystem::path root_;
  PreprocessConfig cfg_;
  mutable std::map<std::string, FlowField> cache_;
};

}  // namespace flowcast
