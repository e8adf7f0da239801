#pragma once

#include <stdexcept>
#include <string>

namespace nsfp {

// Exit-code contract of the CLI: 1 usage, 2 config, 3 numerical, 4 invariant.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Hard run-state violations: volume floor, lost positivity, NaN fields.
struct InvariantViolation : std::runtime_error {
  explicit InvariantViolation(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;
inline constexpr int exit_invariant = 4;

}  // namespace nsfp
