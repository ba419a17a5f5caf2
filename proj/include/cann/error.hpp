#pragma once

#include <stdexcept>
#include <string>

namespace cann {

// Configuration, geometry and parse problems. The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Solver failures, NaN losses, degenerate numerics. The CLI maps these to exit code 3.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace cann
