#include <doctest.h>

#include <cstring>
#include <random>
#include <stdexcept>
#include <vector>

#include "flowcast/trajectory.hpp"

using namespace flowcast;

namespace {

std::vector<Centroid> xs(std::initializer_list<double> x, double y = 50.0) {
  std::vector<Centroid> out;
  for (double v : x) out.push_back({v, y});
  return out;
}

}  // namespace

TEST_CASE("velocity is the endpoint difference over the window") {
  CHECK(estimate_velocity(xs({100, 102, 104, 106, 108}), 4).vx == doctest::Approx(2.0));
  CHECK(estimate_velocity(xs({100, 102, 104, 106, 108}), 4).vy == doctest::Approx(0.0));
  CHECK(estimate_velocity(xs({108, 106, 104, 102, 100}), 4).vx == doctest::Approx(-2.0));
  const auto still = estimate_velocity(xs({77, 77, 77, 77, 77}), 4);
  CHECK(still.vx == 0.0);
  CHECK(still.vy == 0.0);
  CHECK_THROWS_AS(estimate_velocity(xs({1, 2}), 4), std::invalid_argument);
}

TEST_CASE("velocity ignores interior points and is translation-equivariant") {
  auto history = xs({100, 90, 120, 95, 108});
  const auto v = estimate_velocity(history, 4);
  CHECK(v.vx == doctest::Approx(2.0));  // (108-100)/4
  for (auto& c : history) {
    c.x += 1234.5;
    c.y -= 77.25;
  }
  const auto shifted = estimate_velocity(history, 4);
  CHECK(shifted.vx == doctest::Approx(v.vx));
  CHECK(shifted.vy == doctest::Approx(v.vy));
}

TEST_CASE("constant-velocity forecast extrapolates linearly") {
  const auto fifteen = cv_forecast({108, 50}, {2, 0}, 15);
  REQUIRE(fifteen.size() == 15);
  CHECK(fifteen.back().x == doctest::Approx(138.0));
  CHECK(fifteen.back().y == doctest::Approx(50.0));

  const auto still = cv_forecast({7, 9}, {0, 0}, 10);
  for (const auto& c : still) {
    CHECK(c.x == 7.0);
    CHECK(c.y == 9.0);
  }

  const auto diag = cv_forecast({50, 50}, {-1, 1}, 10);
  CHECK(diag.back().x == doctest::Approx(40.0));
  CHECK(diag.back().y == doctest::Approx(60.0));
}

TEST_CASE("constant-acceleration forecast is exact on accelerating tracks") {
  // positions with per-step velocities 1,2,3,4 (unit acceleration)
  const auto history = xs({100, 101, 103, 106, 110});
  const auto pred = ca_forecast(history, 4, 2);
  REQUIRE(pred.size() == 2);
  // continuing the pattern: next step velocities are 5 then 6
  CHECK(pred[0].x == doctest::Approx(115.0));
  CHECK(pred[1].x == doctest::Approx(121.0));

  // long-horizon exactness against the explicit recursion
  std::vector<Centroid> track;
  double x = 3.0, y = -2.0, vx = 0.4, vy = -0.1;
  const double ax = 0.05, ay = 0.02;
  for (int i = 0; i < 30; ++i) {
    track.push_back({x, y});
    x += vx;
    y += vy;
    vx += ax;
    vy += ay;
  }
  const std::vector<Centroid> past(track.begin(), track.begin() + 5);
  const auto ca = ca_forecast(past, 4, 15);
  for (int k = 1; k <= 15; ++k) {
    CHECK(std::abs(ca[size_t(k - 1)].x - track[size_t(4 + k)].x) < 1e-6);
    CHECK(std::abs(ca[size_t(k - 1)].y - track[size_t(4 + k)].y) < 1e-6);
  }
}

TEST_CASE("zero acceleration makes CA bitwise equal to CV") {
  const auto history = xs({100, 102, 104, 106, 108});
  const auto ca = ca_forecast(history, 4, 15);
  const auto cv = cv_forecast(history.back(), estimate_velocity(history, 4), 15);
  REQUIRE(ca.size() == cv.size());
  for (size_t i = 0; i < ca.size(); ++i) {
    CHECK(std::memcmp(&ca[i].x, &cv[i].x, sizeof(double)) == 0);
    CHECK(std::memcmp(&ca[i].y, &cv[i].y, sizeof(double)) == 0);
  }

  const auto still = ca_forecast(xs({5, 5, 5, 5, 5}, 9), 4, 8);
  for (const auto& c : still) {
    CHECK(c.x == 5.0);
    CHECK(c.y == 9.0);
  }
}

TEST_CASE("residual target is signed truth minus forecast") {
  const std::vector<Centroid> ahead{{140, 52}};
  const std::vector<Centroid> base{{138, 50}};
  const std::vector<Centroid> behind{{130, 50}};
  const auto c = residual_target(ahead, base);
  CHECK(c[0].dx == doctest::Approx(2.0));
  CHECK(c[0].dy == doctest::Approx(2.0));
  const auto zero = residual_target(base, base);
  CHECK(zero[0].dx == 0.0);
  CHECK(zero[0].dy == 0.0);
  const auto neg = residual_target(behind, base);
  CHECK(neg[0].dx == doctest::Approx(-8.0));
  CHECK(neg[0].dy == doctest::Approx(0.0));
  const std::vector<Centroid> one{{1, 1}};
  const std::vector<Centroid> two{{1, 1}, {2, 2}};
  CHECK_THROWS_AS(residual_target(one, two), std::invalid_argument);
}

TEST_CASE("recovery adds the correction back onto the forecast") {
  const std::vector<Centroid> base{{138, 50}};
  const std::vector<Offset> shift{{2, 2}};
  const auto out = recover_locations(base, shift);
  CHECK(out[0].x == doctest::Approx(140.0));
  CHECK(out[0].y == doctest::Approx(52.0));
  const std::vector<Offset> twice{{0, 0}, {0, 0}};
  CHECK_THROWS_AS(recover_locations(base, twice), std::invalid_argument);
}

TEST_CASE("round-trip: recovery of the residual reproduces the truth") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(-500.0, 500.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<Centroid> truth(15), cv(15);
    for (int k = 0; k < 15; ++k) {
      truth[size_t(k)] = {unif(rng), unif(rng)};
      cv[size_t(k)] = {unif(rng), unif(rng)};
    }
    const auto rec = recover_locations(cv, residual_target(truth, cv));
    for (int k = 0; k < 15; ++k) {
      CHECK(std::abs(rec[size_t(k)].x - truth[size_t(k)].x) < 1e-9);
      CHECK(std::abs(rec[size_t(k)].y - truth[size_t(k)].y) < 1e-9);
    }
  }
}

TEST_CASE("forecasts on exactly linear motion have zero error") {
  std::vector<Centroid> track;
  for (int i = 0; i < 25; ++i) track.push_back({10.0 + 1.25 * i, 40.0 - 0.5 * i});
  const std::vector<Centroid> past(track.begin(), track.begin() + 5);
  const auto cv = cv_forecast(past.back(), estimate_velocity(past, 4), 15);
  for (int k = 1; k <= 15; ++k) {
    CHECK(std::abs(cv[size_t(k - 1)].x - track[size_t(4 + k)].x) < 1e-9);
    CHECK(std::abs(cv[size_t(k - 1)].y - track[size_t(4 + k)].y) < 1e-9);
  }
}

TEST_CASE("track accessors cover frames and centroids") {
  Track t;
  t.video_id = "video_0001";
  t.track_id = 3;
  t.start_frame = 10;
  t.boxes = {{0, 0, 10, 20}, {2, 2, 12, 22}};
  CHECK(t.length() == 2);
  CHECK(t.end_frame() == 11);
  CHECK(t.box_at(11).x1 == 2.0);
  CHECK(t.centroid_at(10).x == doctest::Approx(5.0));
  CHECK(t.centroid_at(10).y == doctest::Approx(10.0));
  CHECK_THROWS_AS(t.box_at(12), std::invalid_argument);
  CHECK_THROWS_AS(t.box_at(9), std::invalid_argument);
  const auto cs = t.centroids();
  REQUIRE(cs.size() == 2);
  CHECK(cs[1].x == doctest::Approx(7.0));
}
