#pragma once

#include <stdexcept>
#include <string>

namespace ordgrade {

/// Invalid argument or configuration value (bad loss parameters,
/// out-of-range labels, dimension mismatches).
class ConfigError : public std::invalid_argument {
  public:
    explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Malformed or invariant-violating data (parse failures, bad scores).
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failure (missing file, unwritable output).
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (divergence, non-finite values).
class NumericError : public std::runtime_error {
  public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Process exit codes used by the CLI. Each error class above maps to its
// own code so scripts can tell configuration mistakes from bad data.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int config = 2;
inline constexpr int data = 3;
inline constexpr int io = 4;
inline constexpr int numeric = 5;
}  // namespace exit_code

}  // namespace ordgrade
