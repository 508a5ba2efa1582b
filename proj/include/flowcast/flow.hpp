#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "flowcast/trajectory.hpp"

namespace flowcast {

// Dense 2-channel motion field. Stored row-major with (u, v) interleaved per
// pixel, matching the .flo payload layout.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // width * height * 2

  static FlowField zeros(int width, int height);

  float& u(int x, int y) { return data[2 * (static_cast<size_t>(y) * width + x)]; }
  float& v(int x, int y) { return data[2 * (static_cast<size_t>(y) * width + x) + 1]; }
  float u(int x, int y) const { return data[2 * (static_cast<size_t>(y) * width + x)]; }
  float v(int x, int y) const { return data[2 * (static_cast<size_t>(y) * width + x) + 1]; }
};

// m normalized fields concatenated into 2m planar channels, ordered
// [u_oldest, v_oldest, ..., u_t, v_t].
struct FlowStack {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;  // planar [c][y][x]

  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
};

enum class CropMode { center, random };

struct PreprocessConfig {
  float clip = 50.0f;   // pixel displacement clip before scaling to [0,1]
  int resize_to = 256;  // side length after the square crop is resampled
  int crop_to = 224;    // final side length
  CropMode crop_mode = CropMode::center;
  uint64_t seed = 0;    // base seed for random crops
};

// Middlebury .flo container: little-endian float magic 202021.25, then
// int32 width, int32 height, then width*height interleaved (u, v) float32.
std::vector<std::byte> encode_flo(const FlowField& field);
FlowField decode_flo(std::span<const std::byte> bytes);  // DataError on malformed input

FlowField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const FlowField& field);

// Expands `box` to a square about its center, intersects with the field
// extent, bilinearly resamples to resize_to x resize_to, then crops to
// crop_to x crop_to. Random crops draw their offset from `rng`, which must be
// provided in that mode. Throws std::invalid_argument when the box misses the
// field entirely.
FlowField crop_resize(const FlowField& field, const BoundingBox& box, const PreprocessConfig& cfg,
                      std::mt19937_64* rng = nullptr);

// Per-component v' = (clamp(v, -clip, clip) + clip) / (2*clip), into [0, 1].
FlowField normalize(const FlowField& field, float clip);

// Concatenates already-normalized fields, oldest first, into 2m channels.
FlowStack stack(std::span<const FlowField> fields);

}  // namespace flowcast
