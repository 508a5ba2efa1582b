#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace flowcast {

// FNV-1a over bytes; used for stable, platform-independent hashing of ids.
uint64_t fnv1a64(std::string_view s, uint64_t seed = 14695981039346656037ull);

// splitmix64 finalizer; derives independent RNG streams from a base seed.
uint64_t mix_seed(uint64_t seed, uint64_t salt);
uint64_t mix_seed(uint64_t seed, std::string_view salt);

// Neumaier compensated summation, order-stable.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// CRC-32 (IEEE, reflected 0xEDB88320).
uint32_t crc32(const void* data, size_t len, uint32_t crc = 0);

// Write to <path>.tmp then rename, so readers never observe partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::byte>& contents);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);

}  // namespace flowcast
