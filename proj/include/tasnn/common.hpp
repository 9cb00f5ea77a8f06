#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace tasnn {

#ifdef TASNN_REAL32
using real = float;
#else
using real = double;
#endif

// Invalid shapes, hyperparameters, schema violations. CLI exit code 1.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent data (events out of range, short samples...).
// CLI exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File content that does not parse; carries a byte offset or line number
// in the message.
struct ParseError : DataError {
  using DataError::DataError;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace tasnn
