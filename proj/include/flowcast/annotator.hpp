#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowcast/trajectory.hpp"

namespace flowcast {

struct Detection {
  std::string video_id;
  int64_t frame = 0;
  BoundingBox box;
  double score = 0.0;  // in [0, 1]
  std::string cls = "pedestrian";
};

struct TrackerConfig {
  double min_score = 0.6;      // detections below this are discarded
  double iou_threshold = 0.3;  // minimum overlap to associate
  int max_age = 1;             // consecutive unmatched frames before a track terminates
};

struct FilterConfig {
  double min_height = 50.0;  // every box must be at least this tall
  int64_t min_length = 25;   // tracks shorter than this are dropped
};

// Intersection over union; 0 when the union is empty.
double iou(const BoundingBox& a, const BoundingBox& b);

struct FrameAssociation {
  std::vector<std::pair<int, int>> matches;  // (track index, detection index)
  std::vector<int> unmatched_tracks;
  std::vector<int> unmatched_detections;
};

// Greedy association in descending IoU. Each track and detection is used at
// most once; pairs below `iou_threshold` stay unmatched. Ties break on the
// lower track index, then the lower detection index.
FrameAssociation associate_frame(std::span<const BoundingBox> track_boxes,
                                 std::span<const BoundingBox> detections, double iou_threshold);

// Tracking-by-detection over one video's detections, which must be sorted by
// frame (ascending, throws on violation). Steps through every frame between
// the first and last detection; frames with no detections age all tracks.
// A track that goes max_age consecutive frames without a match terminates at
// its last matched frame. Output is deterministic: track ids are assigned in
// creation order and results are sorted by id.
std::vector<Track> run_tracker(std::span<const Detection> detections, const TrackerConfig& cfg);

// Splits a mixed stream by video (sorted by id) and runs the tracker per video.
std::vector<Track> run_tracker_per_video(std::span<const Detection> detections,
                                         const TrackerConfig& cfg);

// Keeps tracks with length >= min_length whose boxes are all >= min_height tall.
std::vector<Track> filter_tracks(std::span<const Track> tracks, const FilterConfig& cfg);

// JSONL, one object per line:
//   detections: {"video","frame","x1","y1","x2","y2","score","class"}
//   tracks:     {"video","track","start_frame","boxes":[[x1,y1,x2,y2],...],"source"}
//               plus optional "occluded":[0,1,...] on human annotations
std::vector<Detection> read_detections_jsonl(const std::filesystem::path& path);
void write_detections_jsonl(const std::filesystem::path& path, std::span<const Detection> dets);
std::vector<Track> read_tracks_jsonl(const std::filesystem::path& path);
void write_tracks_jsonl(const std::filesystem::path& path, std::span<const Track> tracks);

std::string to_string(TrackSource source);
TrackSource track_source_from_string(const std::string& s);

}  // namespace flowcast
