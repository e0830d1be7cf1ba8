#pragma once

#include <stdexcept>
#include <string>

namespace emmc {

// Error taxonomy mirrored by the CLI exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace emmc
