#pragma once

#include <stdexcept>
#include <string>

namespace chanprune {

// Incompatible tensor or layer shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad user configuration: unknown keys, invalid values, unknown metric names.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed on-disk data (dataset files, checkpoints, trajectory CSVs).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chanprune
