#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "flowcast/errors.hpp"
#include "flowcast/flow.hpp"
#include "test_helpers.hpp"

using namespace flowcast;

namespace {

FlowField constant_field(int w, int h, float u, float v) {
  FlowField f = FlowField::zeros(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.u(x, y) = u;
      f.v(x, y) = v;
    }
  }
  return f;
}

// u stores the x coordinate, v the y coordinate; handy for locating crops.
FlowField coordinate_field(int w, int h) {
  FlowField f = FlowField::zeros(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.u(x, y) = static_cast<float>(x);
      f.v(x, y) = static_cast<float>(y);
    }
  }
  return f;
}

bool identical(const FlowField& a, const FlowField& b) {
  return a.width == b.width && a.height == b.height && a.data.size() == b.data.size() &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

}  // namespace

TEST_CASE("flo encoding has a 12-byte header plus 8 bytes per pixel") {
  CHECK(encode_flo(FlowField::zeros(1, 1)).size() == 12 + 8);
  CHECK(encode_flo(FlowField::zeros(3, 2)).size() == 12 + 48);
  CHECK(encode_flo(FlowField::zeros(16, 9)).size() == 12 + 16 * 9 * 8);
}

TEST_CASE("flo round-trips a 1x1 field exactly") {
  FlowField f = FlowField::zeros(1, 1);
  f.u(0, 0) = 1.5f;
  f.v(0, 0) = -2.25f;
  FlowField g = decode_flo(encode_flo(f));
  CHECK(identical(f, g));
  CHECK(g.u(0, 0) == 1.5f);
  CHECK(g.v(0, 0) == -2.25f);
}

TEST_CASE("flo round-trips a 2x2 zero field exactly") {
  FlowField f = FlowField::zeros(2, 2);
  CHECK(identical(f, decode_flo(encode_flo(f))));
}

TEST_CASE("flo round-trips random fields bit-exactly") {
  std::mt19937_64 rng(11);
  std::normal_distribution<float> val(0.0f, 40.0f);
  std::uniform_int_distribution<int> dim(1, 17);
  for (int rep = 0; rep < 200; ++rep) {
    FlowField f = FlowField::zeros(dim(rng), dim(rng));
    for (float& x : f.data) x = val(rng);
    const std::vector<std::byte> bytes = encode_flo(f);
    FlowField g = decode_flo(bytes);
    CHECK(identical(f, g));
    // Re-encoding is also byte-identical.
    CHECK(encode_flo(g) == bytes);
  }
}

TEST_CASE("flo decode rejects malformed streams") {
  FlowField f = FlowField::zeros(2, 3);
  std::vector<std::byte> good = encode_flo(f);

  SUBCASE("bad magic") {
    std::vector<std::byte> bad = good;
    const float zero = 0.0f;
    std::memcpy(bad.data(), &zero, 4);
    CHECK_THROWS_AS(decode_flo(bad), DataError);
  }
  SUBCASE("truncated header") {
    std::vector<std::byte> bad(good.begin(), good.begin() + 7);
    CHECK_THROWS_AS(decode_flo(bad), DataError);
  }
  SUBCASE("truncated payload") {
    std::vector<std::byte> bad(good.begin(), good.end() - 1);
    CHECK_THROWS_AS(decode_flo(bad), DataError);
  }
  SUBCASE("trailing bytes") {
    std::vector<std::byte> bad = good;
    bad.push_back(std::byte{0});
    CHECK_THROWS_AS(decode_flo(bad), DataError);
  }
  SUBCASE("nonpositive dimensions") {
    std::vector<std::byte> bad = good;
    const int32_t zero = 0;
    std::memcpy(bad.data() + 4, &zero, 4);  // width = 0
    CHECK_THROWS_AS(decode_flo(bad), DataError);
    bad = good;
    const int32_t neg = -3;
    std::memcpy(bad.data() + 8, &neg, 4);  // height = -3
    CHECK_THROWS_AS(decode_flo(bad), DataError);
  }
}

TEST_CASE("flo file write/read round-trip") {
  TempDir tmp("flo");
  std::mt19937_64 rng(5);
  std::normal_distribution<float> val(0.0f, 10.0f);
  FlowField f = FlowField::zeros(7, 4);
  for (float& x : f.data) x = val(rng);
  const auto path = tmp.path / "a.flo";
  write_flo(path, f);
  CHECK(identical(f, read_flo(path)));
  CHECK_THROWS_AS(read_flo(tmp.path / "missing.flo"), DataError);
}

TEST_CASE("crop_resize keeps a constant field constant") {
  FlowField f = constant_field(64, 48, 3.0f, 1.0f);
  PreprocessConfig cfg;
  cfg.resize_to = 32;
  cfg.crop_to = 24;
  cfg.crop_mode = CropMode::center;
  // A box near the edge so the square expansion gets clipped by the frame.
  FlowField out = crop_resize(f, BoundingBox{2.0, 5.0, 14.0, 43.0}, cfg);
  REQUIRE(out.width == 24);
  REQUIRE(out.height == 24);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      CHECK(out.u(x, y) == doctest::Approx(3.0f).epsilon(1e-6));
      CHECK(out.v(x, y) == doctest::Approx(1.0f).epsilon(1e-6));
    }
  }
}

TEST_CASE("center crop from 256 to 224 starts at offset (16,16)") {
  FlowField f = coordinate_field(256, 256);
  PreprocessConfig cfg;  // defaults: resize 256, crop 224, center
  // Square region exactly covering the frame makes the resample an identity.
  FlowField out = crop_resize(f, BoundingBox{0.0, 0.0, 256.0, 256.0}, cfg);
  REQUIRE(out.width == 224);
  REQUIRE(out.height == 224);
  CHECK(out.u(0, 0) == 16.0f);
  CHECK(out.v(0, 0) == 16.0f);
  CHECK(out.u(223, 0) == 239.0f);
  CHECK(out.v(0, 223) == 239.0f);
  CHECK(out.u(100, 57) == 116.0f);
  CHECK(out.v(100, 57) == 73.0f);
}

TEST_CASE("random crop offsets are seeded, in range, and varied") {
  FlowField f = coordinate_field(128, 128);
  PreprocessConfig cfg;
  cfg.resize_to = 128;
  cfg.crop_to = 96;
  cfg.crop_mode = CropMode::random;
  const BoundingBox box{0.0, 0.0, 128.0, 128.0};

  std::mt19937_64 a(42), b(42);
  CHECK(identical(crop_resize(f, box, cfg, &a), crop_resize(f, box, cfg, &b)));

  std::mt19937_64 rng(7);
  std::set<std::pair<float, float>> offsets;
  for (int rep = 0; rep < 50; ++rep) {
    FlowField out = crop_resize(f, box, cfg, &rng);
    const float ox = out.u(0, 0);
    const float oy = out.v(0, 0);
    CHECK(ox >= 0.0f);
    CHECK(ox <= 32.0f);
    CHECK(oy >= 0.0f);
    CHECK(oy <= 32.0f);
    CHECK(ox == std::floor(ox));  // integer pixel offsets only
    CHECK(oy == std::floor(oy));
    offsets.insert({ox, oy});
  }
  CHECK(offsets.size() > 1);
}

TEST_CASE("crop_resize rejects bad inputs") {
  FlowField f = constant_field(32, 32, 0.0f, 0.0f);
  PreprocessConfig cfg;
  cfg.resize_to = 16;
  cfg.crop_to = 8;

  CHECK_THROWS_AS(crop_resize(f, BoundingBox{40.0, 40.0, 50.0, 60.0}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(crop_resize(f, BoundingBox{10.0, 10.0, 5.0, 20.0}, cfg), std::invalid_argument);

  PreprocessConfig bad = cfg;
  bad.crop_to = 32;
  bad.resize_to = 16;
  CHECK_THROWS_AS(crop_resize(f, BoundingBox{0.0, 0.0, 10.0, 10.0}, bad), std::invalid_argument);

  PreprocessConfig rnd = cfg;
  rnd.crop_mode = CropMode::random;
  CHECK_THROWS_AS(crop_resize(f, BoundingBox{0.0, 0.0, 10.0, 10.0}, rnd, nullptr),
                  std::invalid_argument);
}

TEST_CASE("normalize maps the clip endpoints and midpoint exactly") {
  FlowField f = FlowField::zeros(3, 1);
  f.u(0, 0) = 100.0f;
  f.v(0, 0) = -50.0f;
  f.u(1, 0) = 0.0f;
  f.v(1, 0) = 50.0f;
  f.u(2, 0) = -100.0f;
  f.v(2, 0) = 25.0f;
  FlowField n = normalize(f, 50.0f);
  CHECK(n.u(0, 0) == 1.0f);   // above +clip saturates
  CHECK(n.v(0, 0) == 0.0f);   // lower endpoint
  CHECK(n.u(1, 0) == 0.5f);   // midpoint
  CHECK(n.v(1, 0) == 1.0f);   // upper endpoint
  CHECK(n.u(2, 0) == 0.0f);   // below -clip saturates
  CHECK(n.v(2, 0) == 0.75f);  // interior point of the linear map
}

TEST_CASE("normalize is monotone and bounded in [0,1]") {
  FlowField f = FlowField::zeros(101, 1);
  for (int x = 0; x <= 100; ++x) f.u(x, 0) = -75.0f + 1.5f * x;
  FlowField n = normalize(f, 50.0f);
  float prev = -1.0f;
  for (int x = 0; x <= 100; ++x) {
    CHECK(n.u(x, 0) >= prev);
    CHECK(n.u(x, 0) >= 0.0f);
    CHECK(n.u(x, 0) <= 1.0f);
    prev = n.u(x, 0);
  }
  CHECK_THROWS_AS(normalize(f, 0.0f), std::invalid_argument);
  CHECK_THROWS_AS(normalize(f, -1.0f), std::invalid_argument);
}

TEST_CASE("stack concatenates fields oldest-first into planar channels") {
  std::vector<FlowField> fields;
  for (int i = 0; i < 9; ++i) {
    fields.push_back(constant_field(4, 3, 0.1f * i, 0.1f * i + 0.05f));
  }
  FlowStack s = stack(fields);
  CHECK(s.channels == 18);
  CHECK(s.width == 4);
  CHECK(s.height == 3);
  REQUIRE(s.data.size() == 18u * 3u * 4u);
  for (int i = 0; i < 9; ++i) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 4; ++x) {
        CHECK(s.at(2 * i, y, x) == fields[i].u(x, y));
        CHECK(s.at(2 * i + 1, y, x) == fields[i].v(x, y));
      }
    }
  }

  CHECK(stack(std::span<const FlowField>(fields.data(), 5)).channels == 10);
  CHECK(stack(std::span<const FlowField>(fields.data(), 1)).channels == 2);
}

TEST_CASE("stack preserves per-pixel values exactly") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  std::vector<FlowField> fields(4, FlowField::zeros(5, 6));
  for (auto& f : fields) {
    for (float& x : f.data) x = val(rng);
  }
  FlowStack s = stack(fields);
  for (int i = 0; i < 4; ++i) {
    for (int y = 0; y < 6; ++y) {
      for (int x = 0; x < 5; ++x) {
        CHECK(s.at(2 * i, y, x) == fields[i].u(x, y));
        CHECK(s.at(2 * i + 1, y, x) == fields[i].v(x, y));
      }
    }
  }
}

TEST_CASE("stack rejects empty or mismatched inputs") {
  std::vector<FlowField> none;
  CHECK_THROWS_AS(stack(none), std::invalid_argument);
  std::vector<FlowField> mismatched{FlowField::zeros(4, 4), FlowField::zeros(4, 5)};
  CHECK_THROWS_AS(stack(mismatched), std::invalid_argument);
}
