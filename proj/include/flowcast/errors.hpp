#pragma once

#include <stdexcept>

namespace flowcast {

// File contents or external inputs that cannot be used (bad format, missing
// file, mismatched checkpoint).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration files or option values that do not parse or validate.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A verification step (e.g. gradient check) that ran but failed.
class CheckError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace flowcast
