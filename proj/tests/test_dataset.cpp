#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/errors.hpp"
#include "flowcast/synth.hpp"
#include "flowcast/util.hpp"
#include "test_helpers.hpp"

using namespace flowcast;

namespace {

Track linear_track(const std::string& video, int64_t track_id, int64_t start, int64_t frames,
                   double vx, double vy = 0.0) {
  ScenarioSpec spec;
  spec.kind = ScenarioKind::constant_velocity;
  spec.duration = static_cast<int>(frames);
  spec.video_id = video;
  spec.track_id = track_id;
  spec.start_frame = start;
  spec.velocity = {vx, vy};
  spec.initial_box = {40.0, 40.0, 64.0, 96.0};
  return gen_scenario(spec).track;
}

// Anchor validity worked out directly from the window definitions.
int64_t brute_force_count(const Track& t, const ForecastConfig& cfg) {
  int64_t count = 0;
  for (int64_t anchor = t.start_frame; anchor <= t.end_frame(); ++anchor) {
    const bool history =
        anchor - std::max<int64_t>(cfg.flow_stack, cfg.velocity_window) >= t.start_frame;
    const bool future = anchor + cfg.horizon <= t.end_frame();
    if (history && future) ++count;
  }
  return count;
}

std::vector<std::string> names(const char* prefix, int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%03d", prefix, i);
    out.emplace_back(buf);
  }
  return out;
}

}  // namespace

TEST_CASE("a 25-frame track with default windows yields exactly the anchor 9") {
  const Track t = linear_track("v000", 0, 0, 25, 1.0, 0.5);
  const Manifest m = build_samples(std::vector<Track>{t}, "flow", ForecastConfig{});
  REQUIRE(m.samples.size() == 1);
  const Sample& s = m.samples[0];
  CHECK(s.anchor == 9);
  CHECK(s.video_id == "v000");
  REQUIRE(s.past.size() == 5);  // velocity_window + 1, frames 5..9
  CHECK(s.past.front().x == t.centroid_at(5).x);
  CHECK(s.past.back().x == t.centroid_at(9).x);
  REQUIRE(s.truth.size() == 15);
  CHECK(s.truth.front().x == t.centroid_at(10).x);
  CHECK(s.truth.back().x == t.centroid_at(24).x);
  REQUIRE(s.boxes.size() == 9);
  REQUIRE(s.flow_paths.size() == 9);
  CHECK(s.flow_paths.front() == "v000/1.flo");  // field at frame f is motion f-1 -> f
  CHECK(s.flow_paths.back() == "v000/9.flo");
  CHECK(s.cv_pred.size() == 15);
  CHECK(s.target.size() == 15);
}

TEST_CASE("sample counts match a brute-force anchor enumeration") {
  const std::vector<ForecastConfig> cfgs{
      {4, 15, 9}, {4, 15, 5}, {2, 3, 1}, {7, 2, 3}, {1, 1, 1},
  };
  for (int64_t frames : {5, 10, 24, 25, 26, 40}) {
    const Track t = linear_track("v001", 3, 7, frames, 0.8, -0.4);
    for (const auto& cfg : cfgs) {
      const Manifest m = build_samples(std::vector<Track>{t}, "", cfg);
      CHECK(static_cast<int64_t>(m.samples.size()) == brute_force_count(t, cfg));
      for (const Sample& s : m.samples) {
        CHECK(s.past.size() == static_cast<size_t>(cfg.velocity_window) + 1);
        CHECK(s.truth.size() == static_cast<size_t>(cfg.horizon));
        CHECK(s.cv_pred.size() == static_cast<size_t>(cfg.horizon));
        CHECK(s.target.size() == static_cast<size_t>(cfg.horizon));
        CHECK(s.boxes.size() == static_cast<size_t>(cfg.flow_stack));
        // target is the signed gap: cv_pred + target recovers the truth.
        const auto rec = recover_locations(s.cv_pred, s.target);
        for (size_t k = 0; k < rec.size(); ++k) {
          CHECK(std::abs(rec[k].x - s.truth[k].x) < 1e-9);
          CHECK(std::abs(rec[k].y - s.truth[k].y) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("tracks below the minimum length yield no samples") {
  const Track t = linear_track("v002", 0, 0, 24, 1.0);
  CHECK(build_samples(std::vector<Track>{t}, "", ForecastConfig{}).samples.empty());
  CHECK_THROWS_AS(build_samples(std::vector<Track>{t}, "", ForecastConfig{0, 15, 9}),
                  std::invalid_argument);
}

TEST_CASE("stationary tracks produce all-zero targets") {
  const Track t = linear_track("v003", 0, 0, 30, 0.0, 0.0);
  const Manifest m = build_samples(std::vector<Track>{t}, "", ForecastConfig{});
  REQUIRE(!m.samples.empty());
  for (const Sample& s : m.samples) {
    for (const Offset& o : s.target) {
      CHECK(o.dx == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(o.dy == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("manifests order samples by video, track, anchor") {
  std::vector<Track> tracks{
      linear_track("vb", 1, 0, 26, 1.0),
      linear_track("va", 2, 0, 27, 1.0),
      linear_track("va", 1, 0, 26, 1.0),
  };
  const Manifest m = build_samples(tracks, "", ForecastConfig{});
  REQUIRE(m.samples.size() >= 4);
  for (size_t i = 1; i < m.samples.size(); ++i) {
    const Sample &a = m.samples[i - 1], &b = m.samples[i];
    CHECK(std::tie(a.video_id, a.track_id, a.anchor) <=
          std::tie(b.video_id, b.track_id, b.anchor));
  }
  CHECK(m.samples.front().video_id == "va");
  CHECK(m.samples.back().video_id == "vb");
}

TEST_CASE("manifests round-trip through JSONL exactly") {
  TempDir tmp("manifest");
  std::vector<Track> tracks{linear_track("v010", 0, 3, 26, 1.25, -0.5),
                            linear_track("v011", 1, 0, 30, 0.75, 0.3)};
  tracks[0].source = TrackSource::machine;
  tracks[1].source = TrackSource::machine;
  Manifest m = build_samples(tracks, "flow", ForecastConfig{});
  REQUIRE(!m.samples.empty());

  const auto path = tmp.path / "manifest.jsonl";
  write_manifest(path, m);
  const Manifest back = read_manifest(path);

  CHECK(back.forecast.velocity_window == m.forecast.velocity_window);
  CHECK(back.forecast.horizon == m.forecast.horizon);
  CHECK(back.forecast.flow_stack == m.forecast.flow_stack);
  CHECK(back.source == m.source);
  CHECK(back.flow_dir == m.flow_dir);
  REQUIRE(back.samples.size() == m.samples.size());
  for (size_t i = 0; i < m.samples.size(); ++i) {
    const Sample &a = m.samples[i], &b = back.samples[i];
    CHECK(a.video_id == b.video_id);
    CHECK(a.track_id == b.track_id);
    CHECK(a.anchor == b.anchor);
    REQUIRE(a.past.size() == b.past.size());
    for (size_t k = 0; k < a.past.size(); ++k) {
      CHECK(a.past[k].x == b.past[k].x);
      CHECK(a.past[k].y == b.past[k].y);
    }
    REQUIRE(a.target.size() == b.target.size());
    for (size_t k = 0; k < a.target.size(); ++k) {
      CHECK(a.target[k].dx == b.target[k].dx);
      CHECK(a.target[k].dy == b.target[k].dy);
    }
    CHECK(a.flow_paths == b.flow_paths);
    REQUIRE(a.boxes.size() == b.boxes.size());
    for (size_t k = 0; k < a.boxes.size(); ++k) {
      CHECK(a.boxes[k].x1 == b.boxes[k].x1);
      CHECK(a.boxes[k].y2 == b.boxes[k].y2);
    }
  }
}

TEST_CASE("manifest reader rejects malformed files") {
  TempDir tmp("badmanifest");

  const auto no_header = tmp.path / "no_header.jsonl";
  write_file_atomic(no_header, std::string("{\"video_id\":\"v\"}\n"));
  CHECK_THROWS_AS(read_manifest(no_header), DataError);

  const auto empty = tmp.path / "empty.jsonl";
  write_file_atomic(empty, std::string(""));
  CHECK_THROWS_AS(read_manifest(empty), DataError);

  const auto bad_version = tmp.path / "bad_version.jsonl";
  write_file_atomic(bad_version,
                    std::string(R"({"kind":"manifest","version":9,"forecast":{"velocity_window":4,)"
                                R"("horizon":15,"flow_stack":9},"source":"human","flow_dir":""})"
                                "\n"));
  CHECK_THROWS_AS(read_manifest(bad_version), DataError);

  const auto bad_line = tmp.path / "bad_line.jsonl";
  write_file_atomic(bad_line,
                    std::string(R"({"kind":"manifest","version":1,"forecast":{"velocity_window":4,)"
                                R"("horizon":15,"flow_stack":9},"source":"human","flow_dir":""})"
                                "\n{\"video_id\":\"v\"}\n"));
  CHECK_THROWS_WITH_AS(read_manifest(bad_line), doctest::Contains(":2:"), DataError);

  CHECK_THROWS_AS(read_manifest(tmp.path / "absent.jsonl"), DataError);
}

TEST_CASE("video_number reads the trailing digits") {
  CHECK(video_number("video_0042") == 42);
  CHECK(video_number("v001") == 1);
  CHECK(video_number("train12") == 12);
  CHECK(video_number("7") == 7);
  CHECK_THROWS_AS(video_number("abc"), DataError);
  CHECK_THROWS_AS(video_number("v12x"), DataError);
  CHECK_THROWS_AS(video_number(""), DataError);
}

TEST_CASE("range splits send low video numbers to train and high to eval") {
  const std::vector<std::string> videos{"video_0000", "video_0100", "video_0250",
                                        "video_0251", "video_0300", "video_0346"};
  const Split s = split_videos(videos, SplitSpec{});  // 0-250 train, 251-346 eval
  CHECK(s.train == std::vector<std::string>{"video_0000", "video_0100", "video_0250"});
  CHECK(s.eval == std::vector<std::string>{"video_0251", "video_0300", "video_0346"});

  SplitSpec overlap;
  overlap.eval_lo = 200;
  CHECK_THROWS_AS(split_videos(videos, overlap), ConfigError);

  SplitSpec reversed;
  reversed.train_lo = 10;
  reversed.train_hi = 5;
  CHECK_THROWS_AS(split_videos(videos, reversed), ConfigError);

  const std::vector<std::string> uncovered{"video_0400"};
  CHECK_THROWS_AS(split_videos(uncovered, SplitSpec{}), DataError);

  const std::vector<std::string> none;
  const Split e = split_videos(none, SplitSpec{});
  CHECK(e.train.empty());
  CHECK(e.eval.empty());
}

TEST_CASE("list splits follow the explicit membership") {
  SplitSpec spec;
  spec.mode = SplitMode::list;
  spec.train_videos = {"a", "b"};
  spec.eval_videos = {"c"};
  const std::vector<std::string> videos{"c", "a", "b"};
  const Split s = split_videos(videos, spec);
  CHECK(s.train == std::vector<std::string>{"a", "b"});
  CHECK(s.eval == std::vector<std::string>{"c"});

  SplitSpec both = spec;
  both.eval_videos = {"b", "c"};
  CHECK_THROWS_AS(split_videos(videos, both), ConfigError);

  const std::vector<std::string> extra{"a", "b", "c", "d"};
  CHECK_THROWS_AS(split_videos(extra, spec), DataError);
}

TEST_CASE("fraction splits cut a seeded hash order at the rounded boundary") {
  const auto videos = names("clip", 10);
  SplitSpec spec;
  spec.mode = SplitMode::fraction;
  spec.train_fraction = 0.8;
  spec.seed = 3;
  const Split s = split_videos(videos, spec);
  CHECK(s.train.size() == 8);
  CHECK(s.eval.size() == 2);

  // Partition: disjoint and exhaustive.
  std::set<std::string> all(s.train.begin(), s.train.end());
  all.insert(s.eval.begin(), s.eval.end());
  CHECK(all.size() == 10);

  // Deterministic under the seed, different under another.
  const Split again = split_videos(videos, spec);
  CHECK(again.train == s.train);
  SplitSpec other = spec;
  other.seed = 4;
  bool differs = split_videos(videos, other).train != s.train;
  SplitSpec third = spec;
  third.seed = 5;
  differs = differs || split_videos(videos, third).train != s.train;
  CHECK(differs);

  // llround at the halfway point rounds away from zero.
  SplitSpec half = spec;
  half.train_fraction = 0.25;
  CHECK(split_videos(videos, half).train.size() == 3);

  SplitSpec bad = spec;
  bad.train_fraction = 1.5;
  CHECK_THROWS_AS(split_videos(videos, bad), ConfigError);
}

TEST_CASE("folds partition the videos evenly and deterministically") {
  const auto videos = names("v", 10);
  const auto folds = make_folds(videos, 5, 11);
  REQUIRE(folds.size() == 5);
  std::set<std::string> seen;
  for (const auto& f : folds) {
    CHECK(f.size() == 2);
    CHECK(std::is_sorted(f.begin(), f.end()));
    seen.insert(f.begin(), f.end());
  }
  CHECK(seen.size() == 10);

  const auto again = make_folds(videos, 5, 11);
  CHECK(again == folds);

  const auto uneven = make_folds(videos, 3, 11);
  std::vector<size_t> sizes;
  for (const auto& f : uneven) sizes.push_back(f.size());
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<size_t>{3, 3, 4});

  CHECK(make_folds(videos, 1, 0).size() == 1);
  CHECK(make_folds(videos, 1, 0)[0].size() == 10);
  CHECK_THROWS_AS(make_folds(videos, 11, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_folds(videos, 0, 0), std::invalid_argument);
  const std::vector<std::string> dup{"a", "a", "b"};
  CHECK_THROWS_AS(make_folds(dup, 2, 0), std::invalid_argument);
}

TEST_CASE("video subsets are nested prefixes of a seeded order") {
  const auto videos = names("v", 20);
  const auto small = subset_videos(videos, 0.3, 9);
  const auto mid = subset_videos(videos, 0.6, 9);
  const auto full = subset_videos(videos, 1.0, 9);
  CHECK(small.size() == 6);
  CHECK(mid.size() == 12);
  CHECK(full.size() == 20);
  const std::set<std::string> mid_set(mid.begin(), mid.end());
  for (const auto& v : small) CHECK(mid_set.count(v) == 1);
  const std::set<std::string> full_set(full.begin(), full.end());
  for (const auto& v : mid) CHECK(full_set.count(v) == 1);

  CHECK(subset_videos(videos, 0.0, 9).empty());
  CHECK_THROWS_AS(subset_videos(videos, -0.1, 9), std::invalid_argument);
  CHECK_THROWS_AS(subset_videos(videos, 1.1, 9), std::invalid_argument);
}

TEST_CASE("select_samples keeps only the chosen videos") {
  std::vector<Track> tracks{linear_track("va", 0, 0, 26, 1.0), linear_track("vb", 0, 0, 26, 1.0),
                            linear_track("vc", 0, 0, 26, 1.0)};
  const Manifest m = build_samples(tracks, "", ForecastConfig{});
  const std::vector<std::string> keep{"va", "vc"};
  const auto picked = select_samples(m.samples, keep);
  CHECK(!picked.empty());
  for (const Sample& s : picked) CHECK(s.video_id != "vb");
  CHECK(picked.size() == m.samples.size() / 3 * 2);
}

TEST_CASE("the flow stack provider assembles aligned normalized stacks") {
  TempDir tmp("provider");
  SuiteConfig cfg;
  cfg.kinds = {ScenarioKind::constant_velocity};
  cfg.per_kind = 1;
  cfg.duration = 12;
  cfg.frame_width = 48;
  cfg.frame_height = 40;
  cfg.box_width = 12.0;
  cfg.box_height = 18.0;
  const auto suite = generate_suite(cfg);
  write_suite(tmp.path, suite);

  const ForecastConfig fc{2, 3, 2};  // m_v 2, n 3, m_f 2
  const Manifest m = build_samples(std::vector<Track>{suite[0].track}, "flow", fc);
  REQUIRE(!m.samples.empty());
  const Sample& s = m.samples.front();

  PreprocessConfig pp;
  pp.clip = 5.0f;
  pp.resize_to = 16;
  pp.crop_to = 12;
  FlowStackProvider provider(tmp.path / "flow", pp);

  const FlowStack center = provider.get(s);
  CHECK(center.channels == 4);
  CHECK(center.height == 12);
  CHECK(center.width == 12);
  for (float v : center.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }

  // Hand-assembled pipeline gives the identical stack.
  std::vector<FlowField> fields;
  for (size_t i = 0; i < s.flow_paths.size(); ++i) {
    PreprocessConfig one = pp;
    one.crop_mode = CropMode::center;
    fields.push_back(
        normalize(crop_resize(read_flo(tmp.path / "flow" / s.flow_paths[i]), s.boxes[i], one),
                  pp.clip));
  }
  const FlowStack manual = stack(fields);
  REQUIRE(manual.data.size() == center.data.size());
  CHECK(std::memcmp(manual.data.data(), center.data.data(),
                    manual.data.size() * sizeof(float)) == 0);

  // Repeated center calls (cache hits) and seeded random crops are stable.
  const FlowStack center2 = provider.get(s);
  CHECK(std::memcmp(center.data.data(), center2.data.data(),
                    center.data.size() * sizeof(float)) == 0);
  const FlowStack r1 = provider.get(s, 42);
  const FlowStack r2 = provider.get(s, 42);
  CHECK(std::memcmp(r1.data.data(), r2.data.data(), r1.data.size() * sizeof(float)) == 0);

  std::set<uint32_t> crcs;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    const FlowStack r = provider.get(s, seed);
    crcs.insert(crc32(r.data.data(), r.data.size() * sizeof(float)));
    for (float v : r.data) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
  CHECK(crcs.size() > 1);

  Sample broken = s;
  broken.flow_paths.back() = "v999/1.flo";
  CHECK_THROWS_AS(provider.get(broken), DataError);
}
