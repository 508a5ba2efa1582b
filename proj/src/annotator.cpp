#include "flowcast/annotator.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flowcast/errors.hpp"
#include "flowcast/util.hpp"

namespace flowcast {

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

FrameAssociation associate_frame(std::span<const BoundingBox> track_boxes,
                                 std::span<const BoundingBox> detections, double iou_threshold) {
  struct Candidate {
    double overlap;
    int track;
    int det;
  };
  std::vector<Candidate> candidates;
  for (int t = 0; t < static_cast<int>(track_boxes.size()); ++t) {
    for (int d = 0; d < static_cast<int>(detections.size()); ++d) {
      const double o = iou(track_boxes[t], detections[d]);
      if (o >= iou_threshold) candidates.push_back({o, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.overlap != b.overlap) return a.overlap > b.overlap;
    if (a.track != b.track) return a.track < b.track;
    return a.det < b.det;
  });

  FrameAssociation out;
  std::vector<bool> track_used(track_boxes.size(), false);
  std::vector<bool> det_used(detections.size(), false);
  for (const auto& c : candidates) {
    if (track_used[c.track] || det_used[c.det]) continue;
    track_used[c.track] = true;
    det_used[c.det] = true;
    out.matches.emplace_back(c.track, c.det);
  }
  for (int t = 0; t < static_cast<int>(track_boxes.size()); ++t) {
    if (!track_used[t]) out.unmatched_tracks.push_back(t);
  }
  for (int d = 0; d < static_cast<int>(detections.size()); ++d) {
    if (!det_used[d]) out.unmatched_detections.push_back(d);
  }
  return out;
}

namespace {

struct ActiveTrack {
  int64_t id;
  int64_t start_frame;
  std::vector<BoundingBox> boxes;  // includes coasted boxes while surviving misses
  size_t matched_len;              // boxes held at the last real match
  int misses;
};

Track finish(const std::string& video_id, ActiveTrack&& t) {
  t.boxes.resize(t.matched_len);  // drop trailing coasted boxes
  Track out;
  out.video_id = video_id;
  out.track_id = t.id;
  out.start_frame = t.start_frame;
  out.boxes = std::move(t.boxes);
  out.source = TrackSource::machine;
  return out;
}

}  // namespace

std::vector<Track> run_tracker(std::span<const Detection> detections, const TrackerConfig& cfg) {
  if (cfg.max_age < 1) throw std::invalid_argument("max_age must be >= 1");
  std::vector<Track> result;
  if (detections.empty()) return result;

  const std::string& video_id = detections.front().video_id;
  for (size_t i = 0; i < detections.size(); ++i) {
    if (detections[i].video_id != video_id) {
      throw std::invalid_argument("run_tracker: detections span multiple videos");
    }
    if (i > 0 && detections[i].frame < detections[i - 1].frame) {
      throw std::invalid_argument("run_tracker: unsorted input");
    }
  }

  // Group score-filtered detections by frame.
  std::map<int64_t, std::vector<BoundingBox>> by_frame;
  for (const auto& d : detections) {
    if (d.score >= cfg.min_score) by_frame[d.frame].push_back(d.box);
  }
  if (by_frame.empty()) return result;

  std::vector<ActiveTrack> active;
  int64_t next_id = 0;
  const int64_t first = by_frame.begin()->first;
  const int64_t last = by_frame.rbegin()->first;

  for (int64_t frame = first; frame <= last; ++frame) {
    static const std::vector<BoundingBox> kEmpty;
    const auto it = by_frame.find(frame);
    const std::vector<BoundingBox>& dets = it != by_frame.end() ? it->second : kEmpty;

    std::vector<BoundingBox> last_boxes;
    last_boxes.reserve(active.size());
    for (const auto& t : active) last_boxes.push_back(t.boxes.back());

    const FrameAssociation assoc = associate_frame(last_boxes, dets, cfg.iou_threshold);

    for (const auto& [ti, di] : assoc.matches) {
      active[ti].boxes.push_back(dets[di]);
      active[ti].matched_len = active[ti].boxes.size();
      active[ti].misses = 0;
    }
    std::vector<ActiveTrack> survivors;
    survivors.reserve(active.size());
    std::vector<bool> missed(active.size(), false);
    for (int ti : assoc.unmatched_tracks) missed[ti] = true;
    for (size_t ti = 0; ti < active.size(); ++ti) {
      if (!missed[ti]) {
        survivors.push_back(std::move(active[ti]));
        continue;
      }
      ActiveTrack& t = active[ti];
      if (++t.misses >= cfg.max_age) {
        result.push_back(finish(video_id, std::move(t)));
      } else {
        t.boxes.push_back(t.boxes.back());  // coast; trimmed if never re-matched
        survivors.push_back(std::move(t));
      }
    }
    active = std::move(survivors);
    for (int di : assoc.unmatched_detections) {
      active.push_back({next_id++, frame, {dets[di]}, 1, 0});
    }
  }
  for (auto& t : active) result.push_back(finish(video_id, std::move(t)));

  std::sort(result.begin(), result.end(),
            [](const Track& a, const Track& b) { return a.track_id < b.track_id; });
  return result;
}

std::vector<Track> run_tracker_per_video(std::span<const Detection> detections,
                                         const TrackerConfig& cfg) {
  std::map<std::string, std::vector<Detection>> by_video;
  for (const auto& d : detections) by_video[d.video_id].push_back(d);
  std::vector<Track> out;
  for (auto& [video, dets] : by_video) {
    std::stable_sort(dets.begin(), dets.end(),
                     [](const Detection& a, const Detection& b) { return a.frame < b.frame; });
    auto tracks = run_tracker(dets, cfg);
    out.insert(out.end(), std::make_move_iterator(tracks.begin()),
               std::make_move_iterator(tracks.end()));
  }
  return out;
}

std::vector<Track> filter_tracks(std::span<const Track> tracks, const FilterConfig& cfg) {
  std::vector<Track> out;
  for (const auto& t : tracks) {
    if (t.length() < cfg.min_length) continue;
    const bool too_small = std::any_of(t.boxes.begin(), t.boxes.end(), [&](const BoundingBox& b) {
      return b.height() < cfg.min_height;
    });
    if (too_small) continue;
    out.push_back(t);
  }
  return out;
}

std::string to_string(TrackSource source) {
  return source == TrackSource::human ? "human" : "machine";
}

TrackSource track_source_from_string(const std::string& s) {
  if (s == "human") return TrackSource::human;
  if (s == "machine") return TrackSource::machine;
  throw DataError("unknown track source: " + s);
}

namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::filesystem::path& path, size_t lineno) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) {
    throw DataError(path.string() + ":" + std::to_string(lineno) + ": invalid JSON");
  }
  return j;
}

template <typename Fn>
void for_each_jsonl(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path.string());
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    fn(parse_line(line, path, lineno), lineno);
  }
}

}  // namespace

std::vector<Detection> read_detections_jsonl(const std::filesystem::path& path) {
  std::vector<Detection> out;
  for_each_jsonl(path, [&](const json& j, size_t lineno) {
    try {
      Detection d;
      d.video_id = j.at("video").get<std::string>();
      d.frame = j.at("frame").get<int64_t>();
      d.box = {j.at("x1").get<double>(), j.at("y1").get<double>(), j.at("x2").get<double>(),
               j.at("y2").get<double>()};
      d.score = j.at("score").get<double>();
      d.cls = j.value("class", "pedestrian");
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

void write_detections_jsonl(const std::filesystem::path& path, std::span<const Detection> dets) {
  std::ostringstream out;
  for (const auto& d : dets) {
    json j;
    j["video"] = d.video_id;
    j["frame"] = d.frame;
    j["x1"] = d.box.x1;
    j["y1"] = d.box.y1;
    j["x2"] = d.box.x2;
    j["y2"] = d.box.y2;
    j["score"] = d.score;
    j["class"] = d.cls;
    out << j.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<Track> read_tracks_jsonl(const std::filesystem::path& path) {
  std::vector<Track> out;
  for_each_jsonl(path, [&](const json& j, size_t lineno) {
    try {
      Track t;
      t.video_id = j.at("video").get<std::string>();
      t.track_id = j.at("track").get<int64_t>();
      t.start_frame = j.at("start_frame").get<int64_t>();
      for (const auto& b : j.at("boxes")) {
        t.boxes.push_back(
            {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()});
      }
      t.source = track_source_from_string(j.at("source").get<std::string>());
      if (j.contains("occluded")) {
        for (const auto& o : j.at("occluded")) t.occluded.push_back(o.get<uint8_t>());
        if (t.occluded.size() != t.boxes.size()) {
          throw DataError("occluded length differs from boxes");
        }
      }
      if (t.boxes.empty()) throw DataError("track with no boxes");
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  });
  return out;
}

void write_tracks_jsonl(const std::filesystem::path& path, std::span<const Track> tracks) {
  std::ostringstream out;
  for (const auto& t : tracks) {
    json j;
    j["video"] = t.video_id;
    j["track"] = t.track_id;
    j["start_frame"] = t.start_frame;
    json boxes = json::array();
    for (const auto& b : t.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    j["boxes"] = std::move(boxes);
    j["source"] = to_string(t.source);
    if (!t.occluded.empty()) j["occluded"] = t.occluded;
    out << j.dump() << '\n';
  }
  write_file_atomic(path, out.str());
}

}  // namespace flowcast
