#include "flowcast/config.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "flowcast/errors.hpp"
#include "flowcast/util.hpp"

namespace flowcast {

NetSpec ExperimentConfig::net_spec() const {
  NetSpec spec;
  spec.input_channels = 2 * forecast.flow_stack;
  spec.input_side = preprocess.crop_to;
  spec.convs = convs;
  spec.horizon = forecast.horizon;
  return spec;
}

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ConfigError("invalid precision (expected f32 or f64): " + s);
}

std::string to_string(MseMode m) {
  return m == MseMode::euclidean ? "euclidean" : "per_coordinate";
}

MseMode mse_mode_from_string(const std::string& s) {
  if (s == "euclidean") return MseMode::euclidean;
  if (s == "per_coordinate") return MseMode::per_coordinate;
  throw ConfigError("invalid mse mode (expected euclidean or per_coordinate): " + s);
}

std::string convs_to_string(const std::vector<ConvSpec>& convs) {
  if (convs.empty()) return "none";
  std::string out;
  for (size_t i = 0; i < convs.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(convs[i].out_channels) + "x" + std::to_string(convs[i].kernel) + "s" +
           std::to_string(convs[i].stride);
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& where, const std::string& v) {
  double out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("invalid number for " + where + ": " + v);
  return out;
}

int64_t parse_int(const std::string& where, const std::string& v) {
  int64_t out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("invalid integer for " + where + ": " + v);
  return out;
}

uint64_t parse_uint(const std::string& where, const std::string& v) {
  uint64_t out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("invalid unsigned integer for " + where + ": " + v);
  }
  return out;
}

bool parse_bool(const std::string& where, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + where + ": " + v);
}

SplitMode split_mode_from(const std::string& s) {
  if (s == "range") return SplitMode::range;
  if (s == "list") return SplitMode::list;
  if (s == "fraction") return SplitMode::fraction;
  throw ConfigError("invalid split mode (expected range, list or fraction): " + s);
}

std::string split_mode_to(SplitMode m) {
  switch (m) {
    case SplitMode::range: return "range";
    case SplitMode::list: return "list";
    case SplitMode::fraction: return "fraction";
  }
  return "range";
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ",";
    out += items[i];
  }
  return out;
}

std::string kinds_to_string(const std::vector<ScenarioKind>& kinds) {
  std::vector<std::string> names;
  names.reserve(kinds.size());
  for (ScenarioKind k : kinds) names.push_back(to_string(k));
  return join(names);
}

}  // namespace

void set_config_key(ExperimentConfig& cfg, const std::string& section, const std::string& key,
                    const std::string& value) {
  const std::string where = section + "." + key;
  if (section == "forecast") {
    if (key == "velocity_window") cfg.forecast.velocity_window = static_cast<int>(parse_int(where, value));
    else if (key == "horizon") cfg.forecast.horizon = static_cast<int>(parse_int(where, value));
    else if (key == "flow_stack") cfg.forecast.flow_stack = static_cast<int>(parse_int(where, value));
    else throw ConfigError("unknown key: " + where);
  } else if (section == "preprocess") {
    if (key == "clip") cfg.preprocess.clip = static_cast<float>(parse_double(where, value));
    else if (key == "resize_to") cfg.preprocess.resize_to = static_cast<int>(parse_int(where, value));
    else if (key == "crop_to") cfg.preprocess.crop_to = static_cast<int>(parse_int(where, value));
    else if (key == "crop_seed") cfg.preprocess.seed = parse_uint(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "tracker") {
    if (key == "min_score") cfg.tracker.min_score = parse_double(where, value);
    else if (key == "iou_threshold") cfg.tracker.iou_threshold = parse_double(where, value);
    else if (key == "max_age") cfg.tracker.max_age = static_cast<int>(parse_int(where, value));
    else throw ConfigError("unknown key: " + where);
  } else if (section == "filter") {
    if (key == "min_height") cfg.filter.min_height = parse_double(where, value);
    else if (key == "min_length") cfg.filter.min_length = parse_int(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "net") {
    if (key == "convs") cfg.convs = convs_from_string(value);
    else if (key == "precision") cfg.precision = precision_from_string(value);
    else if (key == "seed") cfg.net_seed = parse_uint(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "optim") {
    if (key == "lr") cfg.train.adam.lr = parse_double(where, value);
    else if (key == "lr_after_drop") cfg.train.lr_after_drop = parse_double(where, value);
    else if (key == "beta1") cfg.train.adam.beta1 = parse_double(where, value);
    else if (key == "beta2") cfg.train.adam.beta2 = parse_double(where, value);
    else if (key == "eps") cfg.train.adam.eps = parse_double(where, value);
    else if (key == "weight_decay") cfg.train.adam.weight_decay = parse_double(where, value);
    else if (key == "decoupled_decay") cfg.train.adam.decoupled_decay = parse_bool(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "train") {
    if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_int(where, value));
    else if (key == "max_epochs") cfg.train.max_epochs = static_cast<int>(parse_int(where, value));
    else if (key == "patience") cfg.train.patience = static_cast<int>(parse_int(where, value));
    else if (key == "min_delta") cfg.train.min_delta = parse_double(where, value);
    else if (key == "seed") cfg.train.seed = parse_uint(where, value);
    else if (key == "random_crop") cfg.train.random_crop = parse_bool(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "eval") {
    if (key == "mse_mode") cfg.mse_mode = mse_mode_from_string(value);
    else if (key == "folds") cfg.folds = static_cast<int>(parse_int(where, value));
    else if (key == "fold_seed") cfg.fold_seed = parse_uint(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "split") {
    if (key == "mode") cfg.split.mode = split_mode_from(value);
    else if (key == "train_lo") cfg.split.train_lo = parse_int(where, value);
    else if (key == "train_hi") cfg.split.train_hi = parse_int(where, value);
    else if (key == "eval_lo") cfg.split.eval_lo = parse_int(where, value);
    else if (key == "eval_hi") cfg.split.eval_hi = parse_int(where, value);
    else if (key == "train_videos") cfg.split.train_videos = split_list(value);
    else if (key == "eval_videos") cfg.split.eval_videos = split_list(value);
    else if (key == "train_fraction") cfg.split.train_fraction = parse_double(where, value);
    else if (key == "seed") cfg.split.seed = parse_uint(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "synth") {
    if (key == "kinds") {
      cfg.synth.kinds.clear();
      for (const std::string& k : split_list(value)) {
        cfg.synth.kinds.push_back(scenario_kind_from_string(k));
      }
    } else if (key == "per_kind") cfg.synth.per_kind = static_cast<int>(parse_int(where, value));
    else if (key == "duration") cfg.synth.duration = static_cast<int>(parse_int(where, value));
    else if (key == "noise_sigma") cfg.synth.noise_sigma = parse_double(where, value);
    else if (key == "seed") cfg.synth.seed = parse_uint(where, value);
    else if (key == "frame_width") cfg.synth.frame_width = static_cast<int>(parse_int(where, value));
    else if (key == "frame_height") cfg.synth.frame_height = static_cast<int>(parse_int(where, value));
    else if (key == "box_width") cfg.synth.box_width = parse_double(where, value);
    else if (key == "box_height") cfg.synth.box_height = parse_double(where, value);
    else if (key == "min_speed") cfg.synth.min_speed = parse_double(where, value);
    else if (key == "max_speed") cfg.synth.max_speed = parse_double(where, value);
    else if (key == "accel_min") cfg.synth.accel_min = parse_double(where, value);
    else if (key == "accel_max") cfg.synth.accel_max = parse_double(where, value);
    else throw ConfigError("unknown key: " + where);
  } else if (section == "pretrain") {
    if (key == "fraction") cfg.pretrain_fraction = parse_double(where, value);
    else throw ConfigError("unknown key: " + where);
  } else {
    throw ConfigError("unknown section: " + section);
  }
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  const std::string dotted = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  const size_t dot = dotted.find('.');
  if (dot == std::string::npos) {
    throw ConfigError("override must look like section.key=value: " + assignment);
  }
  set_config_key(cfg, dotted.substr(0, dot), dotted.substr(dot + 1), value);
}

std::vector<ConvSpec> convs_from_string(const std::string& s) {
  const std::string t = trim(s);
  if (t.empty() || t == "none") return {};
  std::vector<ConvSpec> out;
  for (const std::string& item : split_list(t)) {
    const size_t x = item.find('x');
    const size_t st = item.find('s', x == std::string::npos ? 0 : x + 1);
    if (x == std::string::npos || st == std::string::npos) {
      throw ConfigError("invalid conv spec (expected CxKsS like 8x3s2): " + item);
    }
    ConvSpec c;
    c.out_channels = static_cast<int>(parse_int("net.convs", item.substr(0, x)));
    c.kernel = static_cast<int>(parse_int("net.convs", item.substr(x + 1, st - x - 1)));
    c.stride = static_cast<int>(parse_int("net.convs", item.substr(st + 1)));
    out.push_back(c);
  }
  return out;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (section.empty()) {
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section: " + key);
    }
    set_config_key(cfg, section, key, value);
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file_text(path));
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string resolved_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[forecast]\n"
      << "velocity_window = " << cfg.forecast.velocity_window << "\n"
      << "horizon = " << cfg.forecast.horizon << "\n"
      << "flow_stack = " << cfg.forecast.flow_stack << "\n\n";
  out << "[preprocess]\n"
      << "clip = " << fmt(cfg.preprocess.clip) << "\n"
      << "resize_to = " << cfg.preprocess.resize_to << "\n"
      << "crop_to = " << cfg.preprocess.crop_to << "\n"
      << "crop_seed = " << cfg.preprocess.seed << "\n\n";
  out << "[tracker]\n"
      << "min_score = " << fmt(cfg.tracker.min_score) << "\n"
      << "iou_threshold = " << fmt(cfg.tracker.iou_threshold) << "\n"
      << "max_age = " << cfg.tracker.max_age << "\n\n";
  out << "[filter]\n"
      << "min_height = " << fmt(cfg.filter.min_height) << "\n"
      << "min_length = " << cfg.filter.min_length << "\n\n";
  out << "[net]\n"
      << "convs = " << convs_to_string(cfg.convs) << "\n"
      << "precision = " << to_string(cfg.precision) << "\n"
      << "seed = " << cfg.net_seed << "\n\n";
  out << "[optim]\n"
      << "lr = " << fmt(cfg.train.adam.lr) << "\n"
      << "lr_after_drop = " << fmt(cfg.train.lr_after_drop) << "\n"
      << "beta1 = " << fmt(cfg.train.adam.beta1) << "\n"
      << "beta2 = " << fmt(cfg.train.adam.beta2) << "\n"
      << "eps = " << fmt(cfg.train.adam.eps) << "\n"
      << "weight_decay = " << fmt(cfg.train.adam.weight_decay) << "\n"
      << "decoupled_decay = " << (cfg.train.adam.decoupled_decay ? "true" : "false") << "\n\n";
  out << "[train]\n"
      << "batch_size = " << cfg.train.batch_size << "\n"
      << "max_epochs = " << cfg.train.max_epochs << "\n"
      << "patience = " << cfg.train.patience << "\n"
      << "min_delta = " << fmt(cfg.train.min_delta) << "\n"
      << "seed = " << cfg.train.seed << "\n"
      << "random_crop = " << (cfg.train.random_crop ? "true" : "false") << "\n\n";
  out << "[eval]\n"
      << "mse_mode = " << to_string(cfg.mse_mode) << "\n"
      << "folds = " << cfg.folds << "\n"
      << "fold_seed = " << cfg.fold_seed << "\n\n";
  out << "[split]\n"
      << "mode = " << split_mode_to(cfg.split.mode) << "\n"
      << "train_lo = " << cfg.split.train_lo << "\n"
      << "train_hi = " << cfg.split.train_hi << "\n"
      << "eval_lo = " << cfg.split.eval_lo << "\n"
      << "eval_hi = " << cfg.split.eval_hi << "\n";
  if (!cfg.split.train_videos.empty()) out << "train_videos = " << join(cfg.split.train_videos) << "\n";
  if (!cfg.split.eval_videos.empty()) out << "eval_videos = " << join(cfg.split.eval_videos) << "\n";
  out << "train_fraction = " << fmt(cfg.split.train_fraction) << "\n"
      << "seed = " << cfg.split.seed << "\n\n";
  out << "[synth]\n"
      << "kinds = " << kinds_to_string(cfg.synth.kinds) << "\n"
      << "per_kind = " << cfg.synth.per_kind << "\n"
      << "duration = " << cfg.synth.duration << "\n"
      << "noise_sigma = " << fmt(cfg.synth.noise_sigma) << "\n"
      << "seed = " << cfg.synth.seed << "\n"
      << "frame_width = " << cfg.synth.frame_width << "\n"
      << "frame_height = " << cfg.synth.frame_height << "\n"
      << "box_width = " << fmt(cfg.synth.box_width) << "\n"
      << "box_height = " << fmt(cfg.synth.box_height) << "\n"
      << "min_speed = " << fmt(cfg.synth.min_speed) << "\n"
      << "max_speed = " << fmt(cfg.synth.max_speed) << "\n"
      << "accel_min = " << fmt(cfg.synth.accel_min) << "\n"
      << "accel_max = " << fmt(cfg.synth.accel_max) << "\n\n";
  out << "[pretrain]\n"
      << "fraction = " << fmt(cfg.pretrain_fraction) << "\n";
  return out.str();
}

}  // namespace flowcast
