#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowcast/annotator.hpp"
#include "flowcast/config.hpp"
#include "flowcast/dataset.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/eval.hpp"
#include "flowcast/experiment.hpp"
#include "flowcast/net.hpp"
#include "flowcast/synth.hpp"
#include "flowcast/train.hpp"
#include "flowcast/util.hpp"

namespace fs = std::filesystem;
using namespace flowcast;

namespace {

// Relative output paths are rooted at $FLOWCAST_OUT when it is set.
fs::path resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("FLOWCAST_OUT")) return fs::path(root) / p;
  return p;
}

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment configuration file");
  cmd->add_option("--set", args.overrides,
                  "override a config key, e.g. --set train.max_epochs=50 (repeatable)");
  cmd->add_option("--out", args.out, "output directory (rooted at $FLOWCAST_OUT if relative)");
}

ExperimentConfig make_config(const CommonArgs& args) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) cfg = load_config(args.config_path);
  for (const std::string& o : args.overrides) apply_override(cfg, o);
  return cfg;
}

void log_resolved(const fs::path& out_dir, const ExperimentConfig& cfg) {
  write_file_atomic(out_dir / "resolved_config.ini", resolved_config(cfg));
}

AnyNet make_net(const ExperimentConfig& cfg) {
  const NetSpec spec = cfg.net_spec();
  if (cfg.precision == Precision::f32) return AnyNet(Net<float>(spec, cfg.net_seed));
  return AnyNet(Net<double>(spec, cfg.net_seed));
}

fs::path flow_root_for(const std::string& flag, const Manifest& manifest) {
  if (!flag.empty()) return flag;
  if (!manifest.flow_dir.empty()) return manifest.flow_dir;
  throw ConfigError("no flow directory: pass --flow-dir or build the manifest with one");
}

// Shared by train / pretrain / finetune.
struct FitArgs {
  CommonArgs common;
  std::string manifest_path;
  std::string flow_dir;
};

void add_fit_options(CLI::App* cmd, FitArgs& args) {
  add_common(cmd, args.common);
  cmd->add_option("--manifest", args.manifest_path, "training manifest")->required();
  cmd->add_option("--flow-dir", args.flow_dir, "root directory of .flo files");
}

int run_fit(const FitArgs& args, double subset_fraction, const std::string& checkpoint_in,
            const char* phase) {
  ExperimentConfig cfg = make_config(args.common);
  const fs::path out_dir = resolve_out(args.common.out);
  fs::create_directories(out_dir);

  const Manifest manifest = read_manifest(args.manifest_path);
  if (manifest.samples.empty()) throw DataError("manifest has no samples");
  FlowStackProvider provider(flow_root_for(args.flow_dir, manifest), cfg.preprocess);

  const std::vector<std::string> videos = manifest_videos(manifest);
  Split split = split_videos(videos, cfg.split);
  if (subset_fraction < 1.0) {
    split.train = subset_videos(split.train, subset_fraction, cfg.split.seed);
    if (split.train.empty()) throw ConfigError("pretrain fraction selects no videos");
  }
  const std::vector<Sample> train_samples = select_samples(manifest.samples, split.train);
  const std::vector<Sample> val_samples = select_samples(manifest.samples, split.eval);
  if (train_samples.empty()) throw DataError("training split has no samples");

  AnyNet net = checkpoint_in.empty() ? make_net(cfg) : load_checkpoint(checkpoint_in);
  if (!checkpoint_in.empty() && !(net_spec(net) == cfg.net_spec())) {
    throw ConfigError("checkpoint architecture does not match the configured network");
  }

  std::printf("%s: %zu train / %zu val samples (%zu/%zu videos), %s precision\n", phase,
              train_samples.size(), val_samples.size(), split.train.size(), split.eval.size(),
              to_string(net_precision(net)).c_str());
  const TrainResult result = train_any(net, provider, train_samples, val_samples, cfg.train);

  save_checkpoint(out_dir / "checkpoint.bin", net);
  write_history_csv(out_dir / "history.csv", result.history);
  log_resolved(out_dir, cfg);

  const EpochStats& first = result.history.front();
  const EpochStats& last = result.history.back();
  std::printf("%s: %zu epochs, train loss %.6g -> %.6g", phase, result.history.size(),
              first.train_loss, last.train_loss);
  if (!val_samples.empty()) std::printf(", val loss %.6g -> %.6g", first.val_loss, last.val_loss);
  std::printf(", lr drops %d%s\n", result.lr_drops, result.stopped_early ? ", stopped early" : "");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pedestrian trajectory forecasting: residual corrections over a "
               "constant-velocity baseline, learned from optical flow"};
  app.require_subcommand(1);

  // synth -----------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scenario suite");
  CommonArgs synth_args;
  add_common(synth_cmd, synth_args);

  // annotate ---------------------------------------------------------------
  auto* annotate_cmd =
      app.add_subcommand("annotate", "link detections into machine tracks and filter them");
  CommonArgs annotate_args;
  std::string detections_path;
  add_common(annotate_cmd, annotate_args);
  annotate_cmd->add_option("--detections", detections_path, "detections JSONL")->required();
  double min_score = -1, iou_threshold = -1, min_height = -1;
  int max_age = -1;
  int64_t min_length = -1;
  annotate_cmd->add_option("--min-score", min_score, "detection score threshold");
  annotate_cmd->add_option("--iou-threshold", iou_threshold, "association overlap threshold");
  annotate_cmd->add_option("--max-age", max_age, "frames a track may go unmatched");
  annotate_cmd->add_option("--min-height", min_height, "minimum box height kept");
  annotate_cmd->add_option("--min-length", min_length, "minimum track length kept");

  // build -------------------------------------------------------------------
  auto* build_cmd = app.add_subcommand("build", "slice tracks + flow into a sample manifest");
  CommonArgs build_args;
  std::string tracks_path, build_flow_dir;
  int m_flow = -1, m_vel = -1, horizon = -1;
  add_common(build_cmd, build_args);
  build_cmd->add_option("--tracks", tracks_path, "tracks JSONL")->required();
  build_cmd->add_option("--flow-dir", build_flow_dir, "root directory of .flo files")->required();
  build_cmd->add_option("--m-flow", m_flow, "flow fields per input stack");
  build_cmd->add_option("--m-vel", m_vel, "centroids spanned by the velocity estimate");
  build_cmd->add_option("--horizon", horizon, "future steps predicted");

  // train / pretrain / finetune ----------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model from scratch");
  FitArgs train_args;
  add_fit_options(train_cmd, train_args);

  auto* pretrain_cmd =
      app.add_subcommand("pretrain", "train on machine-annotated data (optionally a subset)");
  FitArgs pretrain_args;
  double fraction = -1.0;
  add_fit_options(pretrain_cmd, pretrain_args);
  pretrain_cmd->add_option("--fraction", fraction, "fraction of training videos to use");

  auto* finetune_cmd = app.add_subcommand("finetune", "resume training from a checkpoint");
  FitArgs finetune_args;
  std::string finetune_ckpt;
  add_fit_options(finetune_cmd, finetune_args);
  finetune_cmd->add_option("--checkpoint", finetune_ckpt, "checkpoint to resume from")->required();

  // eval ----------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "report CV/CA baselines and model metrics per fold");
  CommonArgs eval_args;
  std::string eval_manifest, eval_flow_dir, eval_ckpt, label = "eval";
  int folds_flag = -1;
  add_common(eval_cmd, eval_args);
  eval_cmd->add_option("--manifest", eval_manifest, "evaluation manifest")->required();
  eval_cmd->add_option("--flow-dir", eval_flow_dir, "root directory of .flo files");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint to evaluate");
  eval_cmd->add_option("--folds", folds_flag, "number of cross-validation folds");
  eval_cmd->add_option("--label", label, "label recorded in the report");

  // gradcheck -------------------------------------------------------------------
  auto* grad_cmd = app.add_subcommand("gradcheck", "verify gradients against finite differences");
  uint64_t grad_seed = 0;
  double grad_eps = 1e-5;
  grad_cmd->add_option("--seed", grad_seed, "seed for the random instance");
  grad_cmd->add_option("--eps", grad_eps, "finite-difference step");

  try {
    app.parse(argc, argv);

    if (synth_cmd->parsed()) {
      ExperimentConfig cfg = make_config(synth_args);
      const fs::path out_dir = resolve_out(synth_args.out);
      fs::create_directories(out_dir);
      const std::vector<Scenario> suite = generate_suite(cfg.synth);
      write_suite(out_dir, suite);
      log_resolved(out_dir, cfg);
      std::printf("synth: wrote %zu scenarios (%d frames each) to %s\n", suite.size(),
                  cfg.synth.duration, out_dir.string().c_str());
      return 0;
    }

    if (annotate_cmd->parsed()) {
      ExperimentConfig cfg = make_config(annotate_args);
      if (min_score >= 0) cfg.tracker.min_score = min_score;
      if (iou_threshold >= 0) cfg.tracker.iou_threshold = iou_threshold;
      if (max_age >= 0) cfg.tracker.max_age = max_age;
      if (min_height >= 0) cfg.filter.min_height = min_height;
      if (min_length >= 0) cfg.filter.min_length = min_length;
      const fs::path out_dir = resolve_out(annotate_args.out);
      fs::create_directories(out_dir);
      const std::vector<Detection> detections = read_detections_jsonl(detections_path);
      const std::vector<Track> raw = run_tracker_per_video(detections, cfg.tracker);
      const std::vector<Track> kept = filter_tracks(raw, cfg.filter);
      write_tracks_jsonl(out_dir / "tracks.jsonl", kept);
      log_resolved(out_dir, cfg);
      std::printf("annotate: %zu detections -> %zu tracks (%zu after filtering)\n",
                  detections.size(), raw.size(), kept.size());
      return 0;
    }

    if (build_cmd->parsed()) {
      ExperimentConfig cfg = make_config(build_args);
      if (m_flow > 0) cfg.forecast.flow_stack = m_flow;
      if (m_vel > 0) cfg.forecast.velocity_window = m_vel;
      if (horizon > 0) cfg.forecast.horizon = horizon;
      const fs::path out_dir = resolve_out(build_args.out);
      fs::create_directories(out_dir);
      const std::vector<Track> tracks = read_tracks_jsonl(tracks_path);
      Manifest manifest = build_samples(tracks, build_flow_dir, cfg.forecast);
      for (const Sample& s : manifest.samples) {
        for (const std::string& rel : s.flow_paths) {
          const fs::path p = fs::path(build_flow_dir) / rel;
          if (!fs::exists(p)) throw DataError("missing flow file: " + p.string());
        }
      }
      write_manifest(out_dir / "manifest.jsonl", manifest);
      log_resolved(out_dir, cfg);
      std::printf("build: %zu tracks -> %zu samples\n", tracks.size(), manifest.samples.size());
      return 0;
    }

    if (train_cmd->parsed()) return run_fit(train_args, 1.0, "", "train");

    if (pretrain_cmd->parsed()) {
      ExperimentConfig cfg = make_config(pretrain_args.common);
      const double f = fraction >= 0 ? fraction : cfg.pretrain_fraction;
      if (f <= 0.0 || f > 1.0) throw ConfigError("pretrain fraction must lie in (0,1]");
      return run_fit(pretrain_args, f, "", "pretrain");
    }

    if (finetune_cmd->parsed()) return run_fit(finetune_args, 1.0, finetune_ckpt, "finetune");

    if (eval_cmd->parsed()) {
      ExperimentConfig cfg = make_config(eval_args);
      if (folds_flag > 0) cfg.folds = folds_flag;
      const fs::path out_dir = resolve_out(eval_args.out);
      fs::create_directories(out_dir);
      const Manifest manifest = read_manifest(eval_manifest);
      if (manifest.samples.empty()) throw DataError("manifest has no samples");
      FlowStackProvider provider(flow_root_for(eval_flow_dir, manifest), cfg.preprocess);
      AnyNet net;
      const bool has_model = !eval_ckpt.empty();
      if (has_model) net = load_checkpoint(eval_ckpt);
      const auto folds = make_folds(manifest_videos(manifest), cfg.folds, cfg.fold_seed);
      EvalReport report =
          evaluate_folds(manifest, provider, folds, has_model ? &net : nullptr,
                         manifest.forecast.velocity_window, cfg.mse_mode, label);
      write_file_atomic(out_dir / "report.csv", report_csv(report));
      write_file_atomic(out_dir / "report.json", report_json(report));
      log_resolved(out_dir, cfg);
      for (const EvalRow& r : report.rows) {
        if (r.fold == "all" && (r.metric == "mse" || r.metric == "de@" + std::to_string(report.horizon))) {
          std::printf("%-5s %-6s %s\n", r.model.c_str(), r.metric.c_str(), r.display.c_str());
        }
      }
      std::printf("eval: %zu rows over %zu folds -> %s\n", report.rows.size(), folds.size(),
                  (out_dir / "report.csv").string().c_str());
      return 0;
    }

    if (grad_cmd->parsed()) {
      NetSpec tiny;
      tiny.input_channels = 2;
      tiny.input_side = 8;
      tiny.convs = {{3, 3, 2}};
      tiny.horizon = 2;
      const double err = grad_check(tiny, grad_seed, grad_eps);
      std::printf("gradcheck: max relative error %.3e (eps %.1e)\n", err, grad_eps);
      if (err >= 1e-4) throw CheckError("gradient check failed: relative error >= 1e-4");
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const CheckError& e) {
    std::fprintf(stderr, "check failure: %s\n", e.what());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {  // DataError and everything else
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
