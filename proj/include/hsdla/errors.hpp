#pragma once

#include <stdexcept>
#include <string>

namespace hsdla {

// Operand shapes do not conform (malformed problem or caller bug).
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requested allocation would overflow or exceed sane bounds.
struct SizingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid device / strategy / CLI configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File format or filesystem failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace hsdla
