#include "flowcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "flowcast/errors.hpp"
#include "flowcast/util.hpp"

namespace flowcast {

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::constant_velocity: return "constant_velocity";
    case ScenarioKind::constant_acceleration: return "constant_acceleration";
    case ScenarioKind::start_walk: return "start_walk";
    case ScenarioKind::stop: return "stop";
    case ScenarioKind::ego_turn: return "ego_turn";
  }
  throw std::invalid_argument("bad scenario kind");
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "constant_velocity") return ScenarioKind::constant_velocity;
  if (s == "constant_acceleration") return ScenarioKind::constant_acceleration;
  if (s == "start_walk") return ScenarioKind::start_walk;
  if (s == "stop") return ScenarioKind::stop;
  if (s == "ego_turn") return ScenarioKind::ego_turn;
  throw ConfigError("unknown scenario kind: " + s);
}

namespace {

// Exact centroid position at frame offset i (0-based), before noise.
Centroid position_at(const ScenarioSpec& spec, const Centroid& origin, int i) {
  const double t = i;
  const double vx = spec.velocity.vx;
  const double vy = spec.velocity.vy;
  switch (spec.kind) {
    case ScenarioKind::constant_velocity:
      return {origin.x + vx * t, origin.y + vy * t};
    case ScenarioKind::constant_acceleration: {
      // Per-step velocity v + a*(i-1), so position gains a*(i-1)*i/2.
      const double ramp = 0.5 * (t - 1.0) * t;
      return {origin.x + vx * t + spec.acceleration.vx * ramp,
              origin.y + vy * t + spec.acceleration.vy * ramp};
    }
    case ScenarioKind::start_walk: {
      const double active = std::max(0.0, t - spec.transition_frame);
      return {origin.x + vx * active, origin.y + vy * active};
    }
    case ScenarioKind::stop: {
      const double active = std::min(t, static_cast<double>(spec.transition_frame));
      return {origin.x + vx * active, origin.y + vy * active};
    }
    case ScenarioKind::ego_turn: {
      const double m = std::max(0.0, t - spec.transition_frame);
      const double ramp = 0.5 * m * (m + 1.0);
      return {origin.x + vx * t + spec.ego_ramp.vx * ramp,
              origin.y + vy * t + spec.ego_ramp.vy * ramp};
    }
  }
  throw std::invalid_argument("bad scenario kind");
}

// Per-step ego offset carried by the background at frame offset i.
Velocity ego_offset_at(const ScenarioSpec& spec, int i) {
  if (spec.kind != ScenarioKind::ego_turn) return {0.0, 0.0};
  const double m = std::max(0.0, static_cast<double>(i - spec.transition_frame));
  return {spec.ego_ramp.vx * m, spec.ego_ramp.vy * m};
}

double maybe_normal(std::mt19937_64& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  std::normal_distribution<double> dist(0.0, sigma);
  return dist(rng);
}

}  // namespace

Scenario gen_scenario(const ScenarioSpec& spec) {
  if (spec.duration < 2) throw std::invalid_argument("scenario duration must be >= 2");
  if (spec.noise_sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  const Centroid origin = centroid_of_box(spec.initial_box);
  const double hw = spec.initial_box.width() / 2.0;
  const double hh = spec.initial_box.height() / 2.0;

  std::mt19937_64 rng(mix_seed(spec.seed, "track"));
  Scenario out;
  out.spec = spec;
  out.track.video_id = spec.video_id;
  out.track.track_id = spec.track_id;
  out.track.start_frame = spec.start_frame;
  out.track.source = TrackSource::human;
  out.track.boxes.reserve(static_cast<size_t>(spec.duration));
  out.true_velocity.resize(static_cast<size_t>(spec.duration));

  Centroid prev = origin;
  for (int i = 0; i < spec.duration; ++i) {
    const Centroid exact = position_at(spec, origin, i);
    if (i > 0) out.true_velocity[static_cast<size_t>(i)] = {exact.x - prev.x, exact.y - prev.y};
    prev = exact;
    const Centroid noisy{exact.x + maybe_normal(rng, spec.noise_sigma),
                         exact.y + maybe_normal(rng, spec.noise_sigma)};
    out.track.boxes.push_back({noisy.x - hw, noisy.y - hh, noisy.x + hw, noisy.y + hh});
  }
  return out;
}

FlowField render_flow(const Track& track, int64_t frame, const ScenarioSpec& spec) {
  if (frame <= track.start_frame || frame > track.end_frame()) {
    throw std::invalid_argument("render_flow: frame must lie in (start, end]");
  }
  const Centroid now = track.centroid_at(frame);
  const Centroid before = track.centroid_at(frame - 1);
  const double du = now.x - before.x;
  const double dv = now.y - before.y;
  const Velocity ego = ego_offset_at(spec, static_cast<int>(frame - track.start_frame));
  const BoundingBox& box = track.box_at(frame);

  FlowField f = FlowField::zeros(spec.frame_width, spec.frame_height);
  std::mt19937_64 rng(mix_seed(mix_seed(spec.seed, "flow"), static_cast<uint64_t>(frame)));
  for (int y = 0; y < f.height; ++y) {
    const double cy = y + 0.5;
    for (int x = 0; x < f.width; ++x) {
      const double cx = x + 0.5;
      if (cx >= box.x1 && cx < box.x2 && cy >= box.y1 && cy < box.y2) {
        f.u(x, y) = static_cast<float>(du + maybe_normal(rng, spec.noise_sigma));
        f.v(x, y) = static_cast<float>(dv + maybe_normal(rng, spec.noise_sigma));
      } else {
        f.u(x, y) = static_cast<float>(ego.vx);
        f.v(x, y) = static_cast<float>(ego.vy);
      }
    }
  }
  return f;
}

std::vector<Detection> corrupt_detections(const Track& track, double drop_rate,
                                          double jitter_sigma, uint64_t seed,
                                          double score_floor) {
  if (drop_rate < 0.0 || drop_rate > 1.0) throw std::invalid_argument("drop_rate must be in [0,1]");
  if (jitter_sigma < 0.0) throw std::invalid_argument("jitter sigma must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Detection> out;
  for (int64_t i = 0; i < track.length(); ++i) {
    if (unif(rng) < drop_rate) continue;
    const BoundingBox& b = track.boxes[static_cast<size_t>(i)];
    double x1 = b.x1 + maybe_normal(rng, jitter_sigma);
    double y1 = b.y1 + maybe_normal(rng, jitter_sigma);
    double x2 = b.x2 + maybe_normal(rng, jitter_sigma);
    double y2 = b.y2 + maybe_normal(rng, jitter_sigma);
    if (x1 > x2) std::swap(x1, x2);
    if (y1 > y2) std::swap(y1, y2);
    Detection d;
    d.video_id = track.video_id;
    d.frame = track.start_frame + i;
    d.box = {x1, y1, x2, y2};
    d.score = score_floor + (1.0 - score_floor) * unif(rng);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Scenario> generate_suite(const SuiteConfig& cfg) {
  if (cfg.kinds.empty() || cfg.per_kind < 1) throw std::invalid_argument("empty suite");
  const double margin = 4.0;
  std::vector<Scenario> out;
  out.reserve(cfg.kinds.size() * static_cast<size_t>(cfg.per_kind));

  int index = 0;
  for (ScenarioKind kind : cfg.kinds) {
    for (int rep = 0; rep < cfg.per_kind; ++rep, ++index) {
      std::mt19937_64 rng(mix_seed(cfg.seed, static_cast<uint64_t>(index)));
      std::uniform_real_distribution<double> unif(0.0, 1.0);

      ScenarioSpec spec;
      spec.kind = kind;
      spec.duration = cfg.duration;
      char name[16];
      std::snprintf(name, sizeof(name), "v%03d", index);
      spec.video_id = name;
      spec.noise_sigma = cfg.noise_sigma;
      spec.seed = mix_seed(cfg.seed, mix_seed(1, static_cast<uint64_t>(index)));
      spec.frame_width = cfg.frame_width;
      spec.frame_height = cfg.frame_height;

      const double speed = cfg.min_speed + (cfg.max_speed - cfg.min_speed) * unif(rng);
      const double angle = 2.0 * std::numbers::pi * unif(rng);
      spec.velocity = {speed * std::cos(angle), speed * std::sin(angle)};
      spec.transition_frame =
          cfg.duration / 4 + static_cast<int>(unif(rng) * (cfg.duration / 2));
      if (kind == ScenarioKind::constant_acceleration) {
        const double a = cfg.accel_min + (cfg.accel_max - cfg.accel_min) * unif(rng);
        const double aa = 2.0 * std::numbers::pi * unif(rng);
        spec.acceleration = {a * std::cos(aa), a * std::sin(aa)};
      }
      if (kind == ScenarioKind::ego_turn) {
        const double r = 0.02 + 0.06 * unif(rng);
        const double ra = 2.0 * std::numbers::pi * unif(rng);
        spec.ego_ramp = {r * std::cos(ra), r * std::sin(ra)};
      }

      // Fit the exact path inside the frame: scale the motion down if it
      // spans too far, then place the start with uniform slack.
      const double ux = unif(rng);
      const double uy = unif(rng);
      for (int pass = 0; pass < 2; ++pass) {
        double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
        for (int i = 0; i < spec.duration; ++i) {
          const Centroid p = position_at(spec, {0.0, 0.0}, i);
          min_x = std::min(min_x, p.x);
          max_x = std::max(max_x, p.x);
          min_y = std::min(min_y, p.y);
          max_y = std::max(max_y, p.y);
        }
        const double span_x = max_x - min_x;
        const double span_y = max_y - min_y;
        const double avail_x = cfg.frame_width - cfg.box_width - 2.0 * margin;
        const double avail_y = cfg.frame_height - cfg.box_height - 2.0 * margin;
        if (avail_x <= 0.0 || avail_y <= 0.0) throw std::invalid_argument("frame too small for box");
        const double fit =
            std::min(span_x > avail_x ? avail_x / span_x : 1.0,
                     span_y > avail_y ? avail_y / span_y : 1.0);
        if (fit < 1.0 && pass == 0) {
          spec.velocity = {spec.velocity.vx * fit, spec.velocity.vy * fit};
          spec.acceleration = {spec.acceleration.vx * fit, spec.acceleration.vy * fit};
          spec.ego_ramp = {spec.ego_ramp.vx * fit, spec.ego_ramp.vy * fit};
          continue;
        }
        const double cx0 = margin + cfg.box_width / 2.0 - min_x + ux * (avail_x - span_x);
        const double cy0 = margin + cfg.box_height / 2.0 - min_y + uy * (avail_y - span_y);
        spec.initial_box = {cx0 - cfg.box_width / 2.0, cy0 - cfg.box_height / 2.0,
                            cx0 + cfg.box_width / 2.0, cy0 + cfg.box_height / 2.0};
        break;
      }
      out.push_back(gen_scenario(spec));
    }
  }
  return out;
}

void write_suite(const std::filesystem::path& dir, std::span<const Scenario> suite) {
  std::vector<Track> tracks;
  std::vector<Detection> detections;
  for (const auto& s : suite) {
    tracks.push_back(s.track);
    for (int64_t i = 0; i < s.track.length(); ++i) {
      Detection d;
      d.video_id = s.track.video_id;
      d.frame = s.track.start_frame + i;
      d.box = s.track.boxes[static_cast<size_t>(i)];
      d.score = 1.0;
      detections.push_back(std::move(d));
    }
  }
  write_tracks_jsonl(dir / "tracks.jsonl", tracks);
  write_detections_jsonl(dir / "detections.jsonl", detections);
  for (const auto& s : suite) {
    const auto video_dir = dir / "flow" / s.track.video_id;
    std::filesystem::create_directories(video_dir);
    for (int64_t f = s.track.start_frame + 1; f <= s.track.end_frame(); ++f) {
      write_flo(video_dir / (std::to_string(f) + ".flo"), render_flow(s.track, f, s.spec));
    }
  }
}

}  // namespace flowcast
