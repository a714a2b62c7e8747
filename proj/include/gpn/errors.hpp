// Exception hierarchy shared by all modules. Each category maps to a
// distinct CLI exit code (see cli.hpp).
#pragma once

#include <stdexcept>
#include <string>

namespace gpn {

// Tensor shape or dimension disagreement.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input data: bad container magic, truncated file, invariant
// violations in event sequences, broken checkpoint.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid run configuration (bad flag value, unknown config key, missing
// required constant).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced by a forward op or a gradient; training
// divergence.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gpn
