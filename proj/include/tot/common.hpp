#pragma once

#include <stdexcept>
#include <string>

namespace tot {

// Error taxonomy maps onto CLI exit codes: ConfigError -> 2, NumericError -> 3,
// IoError -> 4. DimensionError is a validation failure, hence a ConfigError.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : ConfigError {
  explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tot
