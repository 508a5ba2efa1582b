#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowcast/annotator.hpp"
#include "flowcast/flow.hpp"
#include "flowcast/trajectory.hpp"

namespace flowcast {

enum class ScenarioKind {
  constant_velocity,
  constant_acceleration,
  start_walk,  // stationary, then a step change to `velocity` at transition_frame
  stop,        // walking at `velocity`, then stationary from transition_frame
  ego_turn,    // constant velocity plus a ramping global offset from transition_frame
};

std::string to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::constant_velocity;
  int duration = 40;  // frames
  std::string video_id = "v000";
  int64_t track_id = 0;
  int64_t start_frame = 0;
  BoundingBox initial_box{0, 0, 24, 56};
  Velocity velocity;            // base velocity (the walking velocity for start_walk/stop)
  Velocity acceleration;        // per-frame velocity increment (constant_acceleration)
  int transition_frame = 20;    // relative to the track start
  Velocity ego_ramp;            // per-frame growth of the global offset after the transition
  double noise_sigma = 0.0;     // jitters centroids and in-box flow pixels
  uint64_t seed = 0;
  int frame_width = 256;        // extent used when rendering flow
  int frame_height = 144;
};

struct Scenario {
  Track track;
  std::vector<Velocity> true_velocity;  // pre-noise displacement into frame i (index 0 is zero)
  ScenarioSpec spec;
};

// Deterministic under spec.seed; centroids follow the kind's kinematics
// exactly, then per-frame Gaussian noise_sigma is added. Box size stays fixed.
Scenario gen_scenario(const ScenarioSpec& spec);

// Full-frame field for one track: pixels whose center falls inside the box at
// `frame` carry the track's centroid displacement (frame-1 -> frame) plus
// Gaussian noise_sigma; the background carries the ego offset (zero except for
// ego_turn). `frame` must lie in (start_frame, end_frame].
FlowField render_flow(const Track& track, int64_t frame, const ScenarioSpec& spec);

// Per-frame detections from a track: corners jittered by N(0, jitter_sigma),
// frames dropped independently with drop_rate, scores uniform in
// [score_floor, 1]. Deterministic under seed.
std::vector<Detection> corrupt_detections(const Track& track, double drop_rate,
                                          double jitter_sigma, uint64_t seed,
                                          double score_floor = 0.7);

// A batch of scenarios with randomized motion parameters, for training and
// stress data. Videos are named v000, v001, ... in order.
struct SuiteConfig {
  std::vector<ScenarioKind> kinds = {ScenarioKind::start_walk, ScenarioKind::stop};
  int per_kind = 10;
  int duration = 40;
  double noise_sigma = 0.0;
  uint64_t seed = 1;
  int frame_width = 256;
  int frame_height = 144;
  double box_width = 24.0;
  double box_height = 56.0;
  double min_speed = 0.8;   // pixels/frame
  double max_speed = 2.5;
  double accel_min = 0.05;  // pixels/frame^2 (constant_acceleration)
  double accel_max = 0.15;
};

std::vector<Scenario> generate_suite(const SuiteConfig& cfg);

// Writes tracks.jsonl (source human), detections.jsonl (one clean detection
// per frame, score 1.0) and flow/<video>/<frame>.flo for every scenario.
void write_suite(const std::filesystem::path& dir, std::span<const Scenario> suite);

}  // namespace flowcast
