#include "flowcast/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "flowcast/errors.hpp"
#include "flowcast/util.hpp"

static_assert(std::endian::native == std::endian::little, "flo I/O assumes a little-endian host");

namespace flowcast {

namespace {

constexpr float kFloMagic = 202021.25f;

template <typename T>
void put(std::vector<std::byte>& out, T value) {
  const size_t at = out.size();
  out.resize(at + sizeof(T));
  std::memcpy(out.data() + at, &value, sizeof(T));
}

template <typename T>
T get(std::span<const std::byte> bytes, size_t at) {
  T value;
  std::memcpy(&value, bytes.data() + at, sizeof(T));
  return value;
}

}  // namespace

FlowField FlowField::zeros(int width, int height) {
  FlowField f;
  f.width = width;
  f.height = height;
  f.data.assign(static_cast<size_t>(width) * height * 2, 0.0f);
  return f;
}

std::vector<std::byte> encode_flo(const FlowField& field) {
  std::vector<std::byte> out;
  out.reserve(12 + field.data.size() * 4);
  put(out, kFloMagic);
  put(out, static_cast<int32_t>(field.width));
  put(out, static_cast<int32_t>(field.height));
  const size_t at = out.size();
  out.resize(at + field.data.size() * 4);
  std::memcpy(out.data() + at, field.data.data(), field.data.size() * 4);
  return out;
}

FlowField decode_flo(std::span<const std::byte> bytes) {
  if (bytes.size() < 12) throw DataError("flo: truncated header");
  const float magic = get<float>(bytes, 0);
  if (magic != kFloMagic) throw DataError("flo: bad magic");
  const int32_t width = get<int32_t>(bytes, 4);
  const int32_t height = get<int32_t>(bytes, 8);
  if (width <= 0 || height <= 0) throw DataError("flo: nonpositive dimensions");
  const size_t payload = static_cast<size_t>(width) * static_cast<size_t>(height) * 2 * 4;
  if (bytes.size() < 12 + payload) throw DataError("flo: truncated payload");
  if (bytes.size() > 12 + payload) throw DataError("flo: trailing bytes");
  FlowField f;
  f.width = width;
  f.height = height;
  f.data.resize(static_cast<size_t>(width) * height * 2);
  std::memcpy(f.data.data(), bytes.data() + 12, payload);
  return f;
}

FlowField read_flo(const std::filesystem::path& path) {
  return decode_flo(read_file_bytes(path));
}

void write_flo(const std::filesystem::path& path, const FlowField& field) {
  write_file_atomic(path, encode_flo(field));
}

namespace {

float sample_bilinear(const FlowField& f, int channel, double x, double y) {
  // x, y in continuous pixel coordinates; pixel centers sit at i + 0.5.
  const double sx = x - 0.5;
  const double sy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const double fx = sx - x0;
  const double fy = sy - y0;
  auto clampx = [&](int i) { return std::clamp(i, 0, f.width - 1); };
  auto clampy = [&](int i) { return std::clamp(i, 0, f.height - 1); };
  auto at = [&](int xi, int yi) {
    const size_t idx = 2 * (static_cast<size_t>(clampy(yi)) * f.width + clampx(xi));
    return f.data[idx + channel];
  };
  const double top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
  const double bot = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
  return static_cast<float>(top * (1.0 - fy) + bot * fy);
}

FlowField resample_region(const FlowField& f, double rx0, double ry0, double rx1, double ry1,
                          int side) {
  FlowField out = FlowField::zeros(side, side);
  const double sx = (rx1 - rx0) / side;
  const double sy = (ry1 - ry0) / side;
  for (int y = 0; y < side; ++y) {
    const double py = ry0 + (y + 0.5) * sy;
    for (int x = 0; x < side; ++x) {
      const double px = rx0 + (x + 0.5) * sx;
      out.u(x, y) = sample_bilinear(f, 0, px, py);
      out.v(x, y) = sample_bilinear(f, 1, px, py);
    }
  }
  return out;
}

FlowField crop_at(const FlowField& f, int side, int ox, int oy) {
  FlowField out = FlowField::zeros(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      out.u(x, y) = f.u(x + ox, y + oy);
      out.v(x, y) = f.v(x + ox, y + oy);
    }
  }
  return out;
}

}  // namespace

FlowField crop_resize(const FlowField& field, const BoundingBox& box, const PreprocessConfig& cfg,
                      std::mt19937_64* rng) {
  if (!box.valid()) throw std::invalid_argument("crop_resize: invalid box");
  if (cfg.crop_to > cfg.resize_to) throw std::invalid_argument("crop_to must be <= resize_to");

  const double cx = (box.x1 + box.x2) / 2.0;
  const double cy = (box.y1 + box.y2) / 2.0;
  const double half = std::max(box.width(), box.height()) / 2.0;
  const double rx0 = std::max(cx - half, 0.0);
  const double ry0 = std::max(cy - half, 0.0);
  const double rx1 = std::min(cx + half, static_cast<double>(field.width));
  const double ry1 = std::min(cy + half, static_cast<double>(field.height));
  if (!(rx0 < rx1) || !(ry0 < ry1)) {
    throw std::invalid_argument("crop_resize: box does not intersect the field");
  }

  FlowField resized = resample_region(field, rx0, ry0, rx1, ry1, cfg.resize_to);
  if (cfg.crop_to == cfg.resize_to) return resized;

  int ox, oy;
  const int slack = cfg.resize_to - cfg.crop_to;
  if (cfg.crop_mode == CropMode::center) {
    ox = oy = slack / 2;
  } else {
    if (rng == nullptr) throw std::invalid_argument("crop_resize: random crop needs an rng");
    std::uniform_int_distribution<int> dist(0, slack);
    ox = dist(*rng);
    oy = dist(*rng);
  }
  return crop_at(resized, cfg.crop_to, ox, oy);
}

FlowField normalize(const FlowField& field, float clip) {
  if (!(clip > 0.0f)) throw std::invalid_argument("normalize: clip must be > 0");
  FlowField out = field;
  const float scale = 1.0f / (2.0f * clip);
  for (float& x : out.data) {
    x = (std::clamp(x, -clip, clip) + clip) * scale;
  }
  return out;
}

FlowStack stack(std::span<const FlowField> fields) {
  if (fields.empty()) throw std::invalid_argument("stack: empty input");
  const int w = fields.front().width;
  const int h = fields.front().height;
  for (const auto& f : fields) {
    if (f.width != w || f.height != h) throw std::invalid_argument("stack: dimension mismatch");
  }
  FlowStack s;
  s.channels = static_cast<int>(fields.size()) * 2;
  s.width = w;
  s.height = h;
  s.data.resize(static_cast<size_t>(s.channels) * h * w);
  const size_t plane = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < fields.size(); ++i) {
    float* uc = s.data.data() + (2 * i) * plane;
    float* vc = s.data.data() + (2 * i + 1) * plane;
    const FlowField& f = fields[i];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        uc[static_cast<size_t>(y) * w + x] = f.u(x, y);
        vc[static_cast<size_t>(y) * w + x] = f.v(x, y);
      }
    }
  }
  return s;
}

}  // namespace flowcast
