#include "flowcast/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flowcast/annotator.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/util.hpp"

namespace flowcast {

using nlohmann::json;

Manifest build_samples(std::span<const Track> tracks, const std::string& flow_dir,
                       const ForecastConfig& cfg) {
  if (cfg.velocity_window < 1 || cfg.horizon < 1 || cfg.flow_stack < 1) {
    throw std::invalid_argument("forecast config fields must be positive");
  }
  Manifest out;
  out.forecast = cfg;
  out.flow_dir = flow_dir;
  if (!tracks.empty()) out.source = tracks.front().source;

  const int64_t back = std::max<int64_t>(cfg.flow_stack, cfg.velocity_window);
  for (const Track& track : tracks) {
    const int64_t lo = track.start_frame + back;
    const int64_t hi = track.end_frame() - cfg.horizon;
    for (int64_t t = lo; t <= hi; ++t) {
      Sample s;
      s.video_id = track.video_id;
      s.track_id = track.track_id;
      s.anchor = t;
      s.past.reserve(static_cast<size_t>(cfg.velocity_window) + 1);
      for (int64_t f = t - cfg.velocity_window; f <= t; ++f) s.past.push_back(track.centroid_at(f));
      const Velocity v = estimate_velocity(s.past, cfg.velocity_window);
      s.cv_pred = cv_forecast(s.past.back(), v, cfg.horizon);
      s.truth.reserve(static_cast<size_t>(cfg.horizon));
      for (int64_t f = t + 1; f <= t + cfg.horizon; ++f) s.truth.push_back(track.centroid_at(f));
      s.target = residual_target(s.truth, s.cv_pred);
      for (int64_t f = t - cfg.flow_stack + 1; f <= t; ++f) {
        s.boxes.push_back(track.box_at(f));
        s.flow_paths.push_back(track.video_id + "/" + std::to_string(f) + ".flo");
      }
      out.samples.push_back(std::move(s));
    }
  }
  std::sort(out.samples.begin(), out.samples.end(), [](const Sample& a, const Sample& b) {
    return std::tie(a.video_id, a.track_id, a.anchor) < std::tie(b.video_id, b.track_id, b.anchor);
  });
  return out;
}

namespace {

json points_json(std::span<const Centroid> pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

json offsets_json(std::span<const Offset> pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.dx, p.dy});
  return a;
}

std::vector<Centroid> points_from(const json& a) {
  std::vector<Centroid> out;
  for (const auto& p : a) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

std::vector<Offset> offsets_from(const json& a) {
  std::vector<Offset> out;
  for (const auto& p : a) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  std::ostringstream body;
  json header = {
      {"kind", "manifest"},
      {"version", 1},
      {"forecast",
       {{"velocity_window", manifest.forecast.velocity_window},
        {"horizon", manifest.forecast.horizon},
        {"flow_stack", manifest.forecast.flow_stack}}},
      {"source", to_string(manifest.source)},
      {"flow_dir", manifest.flow_dir},
  };
  body << header.dump() << "\n";
  for (const Sample& s : manifest.samples) {
    json boxes = json::array();
    for (const auto& b : s.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    json line = {
        {"video_id", s.video_id}, {"track_id", s.track_id}, {"anchor", s.anchor},
        {"past", points_json(s.past)},   {"cv_pred", points_json(s.cv_pred)},
        {"truth", points_json(s.truth)}, {"target", offsets_json(s.target)},
        {"boxes", boxes},                {"flow", s.flow_paths},
    };
    body << line.dump() << "\n";
  }
  write_file_atomic(path, body.str());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file_text(path));
  Manifest out;
  std::string line;
  int64_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      if (!saw_header) {
        if (j.value("kind", "") != "manifest") throw DataError("missing manifest header");
        if (j.at("version").get<int>() != 1) throw DataError("unsupported manifest version");
        const json& fc = j.at("forecast");
        out.forecast.velocity_window = fc.at("velocity_window").get<int>();
        out.forecast.horizon = fc.at("horizon").get<int>();
        out.forecast.flow_stack = fc.at("flow_stack").get<int>();
        out.source = track_source_from_string(j.at("source").get<std::string>());
        out.flow_dir = j.value("flow_dir", "");
        saw_header = true;
        continue;
      }
      Sample s;
      s.video_id = j.at("video_id").get<std::string>();
      s.track_id = j.at("track_id").get<int64_t>();
      s.anchor = j.at("anchor").get<int64_t>();
      s.past = points_from(j.at("past"));
      s.cv_pred = points_from(j.at("cv_pred"));
      s.truth = points_from(j.at("truth"));
      s.target = offsets_from(j.at("target"));
      for (const auto& b : j.at("boxes")) {
        s.boxes.push_back({b.at(0).get<double>(), b.at(1).get<double>(),
                           b.at(2).get<double>(), b.at(3).get<double>()});
      }
      s.flow_paths = j.at("flow").get<std::vector<std::string>>();
      if (s.boxes.size() != s.flow_paths.size()) throw DataError("boxes/flow length mismatch");
      out.samples.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!saw_header) throw DataError(path.string() + ": missing manifest header");
  return out;
}

int64_t video_number(const std::string& video_id) {
  size_t end = video_id.size();
  size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(video_id[begin - 1]))) --begin;
  if (begin == end) throw DataError("video id has no numeric suffix: " + video_id);
  return std::stoll(video_id.substr(begin, end - begin));
}

namespace {

std::vector<std::string> sorted_unique(std::span<const std::string> videos) {
  std::vector<std::string> v(videos.begin(), videos.end());
  std::sort(v.begin(), v.end());
  if (std::adjacent_find(v.begin(), v.end()) != v.end()) {
    throw std::invalid_argument("duplicate video ids");
  }
  return v;
}

// Seeded hash order; ties (hash collisions) fall back to the id itself so the
// order is total and input-order independent.
std::vector<std::string> hash_order(std::span<const std::string> videos, uint64_t seed) {
  std::vector<std::string> v = sorted_unique(videos);
  std::sort(v.begin(), v.end(), [seed](const std::string& a, const std::string& b) {
    const uint64_t ha = mix_seed(seed, a), hb = mix_seed(seed, b);
    return std::tie(ha, a) < std::tie(hb, b);
  });
  return v;
}

}  // namespace

Split split_videos(std::span<const std::string> videos, const SplitSpec& spec) {
  Split out;
  switch (spec.mode) {
    case SplitMode::range: {
      if (spec.train_lo > spec.train_hi || spec.eval_lo > spec.eval_hi) {
        throw ConfigError("split range bounds out of order");
      }
      const bool disjoint = spec.train_hi < spec.eval_lo || spec.eval_hi < spec.train_lo;
      if (!disjoint) throw ConfigError("split ranges overlap");
      for (const std::string& id : sorted_unique(videos)) {
        const int64_t n = video_number(id);
        if (n >= spec.train_lo && n <= spec.train_hi) out.train.push_back(id);
        else if (n >= spec.eval_lo && n <= spec.eval_hi) out.eval.push_back(id);
        else throw DataError("video not covered by split ranges: " + id);
      }
      return out;
    }
    case SplitMode::list: {
      std::set<std::string> train(spec.train_videos.begin(), spec.train_videos.end());
      std::set<std::string> eval(spec.eval_videos.begin(), spec.eval_videos.end());
      for (const std::string& id : train) {
        if (eval.count(id)) throw ConfigError("video listed in both splits: " + id);
      }
      for (const std::string& id : sorted_unique(videos)) {
        if (train.count(id)) out.train.push_back(id);
        else if (eval.count(id)) out.eval.push_back(id);
        else throw DataError("video not covered by split lists: " + id);
      }
      return out;
    }
    case SplitMode::fraction: {
      if (spec.train_fraction < 0.0 || spec.train_fraction > 1.0) {
        throw ConfigError("train fraction must lie in [0,1]");
      }
      std::vector<std::string> ordered = hash_order(videos, spec.seed);
      const auto n_train =
          static_cast<size_t>(std::llround(spec.train_fraction * static_cast<double>(ordered.size())));
      out.train.assign(ordered.begin(), ordered.begin() + static_cast<ptrdiff_t>(n_train));
      out.eval.assign(ordered.begin() + static_cast<ptrdiff_t>(n_train), ordered.end());
      std::sort(out.train.begin(), out.train.end());
      std::sort(out.eval.begin(), out.eval.end());
      return out;
    }
  }
  throw ConfigError("bad split mode");
}

std::vector<std::vector<std::string>> make_folds(std::span<const std::string> videos,
                                                 int k, uint64_t seed) {
  if (k < 1) throw std::invalid_argument("fold count must be >= 1");
  std::vector<std::string> v = sorted_unique(videos);
  if (static_cast<size_t>(k) > v.size()) throw std::invalid_argument("more folds than videos");
  std::mt19937_64 rng(seed);
  std::shuffle(v.begin(), v.end(), rng);
  std::vector<std::vector<std::string>> folds(static_cast<size_t>(k));
  for (size_t i = 0; i < v.size(); ++i) folds[i % static_cast<size_t>(k)].push_back(v[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::string> subset_videos(std::span<const std::string> videos,
                                       double fraction, uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("fraction must lie in [0,1]");
  std::vector<std::string> ordered = hash_order(videos, seed);
  const auto n =
      static_cast<size_t>(std::llround(fraction * static_cast<double>(ordered.size())));
  ordered.resize(n);
  std::sort(ordered.begin(), ordered.end());
  return ordered;
}

std::vector<Sample> select_samples(std::span<const Sample> samples,
                                   std::span<const std::string> videos) {
  std::set<std::string> keep(videos.begin(), videos.end());
  std::vector<Sample> out;
  for (const Sample& s : samples) {
    if (keep.count(s.video_id)) out.push_back(s);
  }
  return out;
}

FlowStackProvider::FlowStackProvider(std::filesystem::path flow_root, PreprocessConfig cfg)
    : root_(std::move(flow_root)), cfg_(cfg) {}

const FlowField& FlowStackProvider::load(const std::string& rel_path) const {
  auto it = cache_.find(rel_path);
  if (it == cache_.end()) {
    it = cache_.emplace(rel_path, read_flo(root_ / rel_path)).first;
  }
  return it->second;
}

FlowStack FlowStackProvider::assemble(const Sample& sample, uint64_t crop_seed,
                                      bool random) const {
  if (sample.flow_paths.empty() || sample.flow_paths.size() != sample.boxes.size()) {
    throw std::invalid_argument("sample has inconsistent flow inputs");
  }
  PreprocessConfig cfg = cfg_;
  cfg.crop_mode = random ? CropMode::random : CropMode::center;
  std::vector<FlowField> fields;
  fields.reserve(sample.flow_paths.size());
  for (size_t i = 0; i < sample.flow_paths.size(); ++i) {
    // A fresh generator per field makes every field of the stack share one
    // crop window, keeping the channels spatially aligned.
    std::mt19937_64 rng(crop_seed);
    FlowField f = crop_resize(load(sample.flow_paths[i]), sample.boxes[i], cfg,
                              random ? &rng : nullptr);
    fields.push_back(normalize(f, cfg.clip));
  }
  return stack(fields);
}

FlowStack FlowStackProvider::get(const Sample& sample) const {
  return assemble(sample, 0, false);
}

FlowStack FlowStackProvider::get(const Sample& sample, uint64_t crop_seed) const {
  return assemble(sample, crop_seed, true);
}

}  // namespace flowcast
