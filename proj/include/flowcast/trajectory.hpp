#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace flowcast {

// Image coordinates are continuous pixels, origin at the top-left corner,
// x rightward, y downward.

struct Centroid {
  double x = 0.0;
  double y = 0.0;
};

struct Velocity {
  double vx = 0.0;  // pixels/frame
  double vy = 0.0;
};

// Signed per-step correction relative to a forecast.
struct Offset {
  double dx = 0.0;
  double dy = 0.0;
};

// One correction vector per horizon step t+1..t+n.
using Residual = std::vector<Offset>;

struct BoundingBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  bool valid() const { return x1 <= x2 && y1 <= y2; }
};

enum class TrackSource { human, machine };

// One identified pedestrian: a box per frame over a contiguous frame range.
struct Track {
  std::string video_id;
  int64_t track_id = 0;
  int64_t start_frame = 0;
  std::vector<BoundingBox> boxes;
  TrackSource source = TrackSource::human;
  std::vector<uint8_t> occluded;  // per-frame flags, human annotation only; empty if absent

  int64_t length() const { return static_cast<int64_t>(boxes.size()); }
  int64_t end_frame() const { return start_frame + length() - 1; }  // inclusive
  const BoundingBox& box_at(int64_t frame) const;
  Centroid centroid_at(int64_t frame) const;
  std::vector<Centroid> centroids() const;
};

struct ForecastConfig {
  int velocity_window = 4;  // centroids spanned by the velocity estimate
  int horizon = 15;         // future steps predicted
  int flow_stack = 9;       // flow fields per input stack
};

Centroid centroid_of_box(const BoundingBox& box);

// Endpoint difference over the last `window` steps: (L_t - L_{t-window}) / window.
// Uses the trailing window+1 centroids; throws std::invalid_argument if fewer.
Velocity estimate_velocity(std::span<const Centroid> centroids, int window);

// L_t + v*k for k = 1..horizon.
std::vector<Centroid> cv_forecast(const Centroid& last, const Velocity& v, int horizon);

// Constant-acceleration extrapolation from the trailing window+1 centroids.
// Average acceleration a = mean of consecutive per-step velocity differences,
// v = last per-step velocity, and the forecast continues the discrete
// recurrence exactly: L_{t+k} = L_t + v*k + a*k*(k+1)/2.
std::vector<Centroid> ca_forecast(std::span<const Centroid> centroids, int window, int horizon);

// Signed correction C_{t+k} = truth_{t+k} - cv_{t+k}.
Residual residual_target(std::span<const Centroid> truth, std::span<const Centroid> cv);

// Final coordinates L_{t+k} = cv_{t+k} + correction_{t+k}.
std::vector<Centroid> recover_locations(std::span<const Centroid> cv, const Residual& correction);

}  // namespace flowcast
