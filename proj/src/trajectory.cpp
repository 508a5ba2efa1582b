#include "flowcast/trajectory.hpp"

#include <stdexcept>

namespace flowcast {

const BoundingBox& Track::box_at(int64_t frame) const {
  const int64_t idx = frame - start_frame;
  if (idx < 0 || idx >= length()) {
    throw std::invalid_argument("frame outside track range");
  }
  return boxes[static_cast<size_t>(idx)];
}

Centroid Track::centroid_at(int64_t frame) const {
  return centroid_of_box(box_at(frame));
}

std::vector<Centroid> Track::centroids() const {
  std::vector<Centroid> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(centroid_of_box(b));
  return out;
}

Centroid centroid_of_box(const BoundingBox& box) {
  return {(box.x1 + box.x2) / 2.0, (box.y1 + box.y2) / 2.0};
}

Velocity estimate_velocity(std::span<const Centroid> centroids, int window) {
  if (window < 1) throw std::invalid_argument("velocity window must be >= 1");
  if (centroids.size() < static_cast<size_t>(window) + 1) {
    throw std::invalid_argument("insufficient history: need window+1 centroids");
  }
  const Centroid& last = centroids[centroids.size() - 1];
  const Centroid& first = centroids[centroids.size() - 1 - static_cast<size_t>(window)];
  return {(last.x - first.x) / window, (last.y - first.y) / window};
}

std::vector<Centroid> cv_forecast(const Centroid& last, const Velocity& v, int horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  std::vector<Centroid> out;
  out.reserve(static_cast<size_t>(horizon));
  for (int k = 1; k <= horizon; ++k) {
    out.push_back({last.x + v.vx * k, last.y + v.vy * k});
  }
  return out;
}

std::vector<Centroid> ca_forecast(std::span<const Centroid> centroids, int window, int horizon) {
  if (window < 1) throw std::invalid_argument("velocity window must be >= 1");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (centroids.size() < static_cast<size_t>(window) + 1) {
    throw std::invalid_argument("insufficient history: need window+1 centroids");
  }
  const size_t end = centroids.size();
  const size_t begin = end - static_cast<size_t>(window) - 1;

  // Per-step velocities over the window, then average acceleration from
  // their consecutive differences. A single step gives a = 0.
  double ax = 0.0, ay = 0.0;
  if (window >= 2) {
    for (size_t i = begin + 2; i < end; ++i) {
      const double ux1 = centroids[i].x - centroids[i - 1].x;
      const double ux0 = centroids[i - 1].x - centroids[i - 2].x;
      const double uy1 = centroids[i].y - centroids[i - 1].y;
      const double uy0 = centroids[i - 1].y - centroids[i - 2].y;
      ax += ux1 - ux0;
      ay += uy1 - uy0;
    }
    ax /= window - 1;
    ay /= window - 1;
  }
  const double vx = centroids[end - 1].x - centroids[end - 2].x;
  const double vy = centroids[end - 1].y - centroids[end - 2].y;
  const Centroid& last = centroids[end - 1];

  std::vector<Centroid> out;
  out.reserve(static_cast<size_t>(horizon));
  for (int k = 1; k <= horizon; ++k) {
    // Continues v_{t+j} = v_t + a*j, so the summed displacement over k steps
    // is v_t*k + a*k*(k+1)/2. With a == 0 this is bitwise equal to the
    // constant-velocity forecast.
    const double dk = k;
    const double ramp = 0.5 * (dk * dk + dk);
    out.push_back({(last.x + vx * dk) + ax * ramp, (last.y + vy * dk) + ay * ramp});
  }
  return out;
}

Residual residual_target(std::span<const Centroid> truth, std::span<const Centroid> cv) {
  if (truth.size() != cv.size()) throw std::invalid_argument("length mismatch");
  Residual out;
  out.reserve(truth.size());
  for (size_t i = 0; i < truth.size(); ++i) {
    out.push_back({truth[i].x - cv[i].x, truth[i].y - cv[i].y});
  }
  return out;
}

std::vector<Centroid> recover_locations(std::span<const Centroid> cv, const Residual& correction) {
  if (cv.size() != correction.size()) throw std::invalid_argument("length mismatch");
  std::vector<Centroid> out;
  out.reserve(cv.size());
  for (size_t i = 0; i < cv.size(); ++i) {
    out.push_back({cv[i].x + correction[i].dx, cv[i].y + correction[i].dy});
  }
  return out;
}

}  // namespace flowcast
