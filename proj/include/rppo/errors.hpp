#pragma once

#include <stdexcept>
#include <string>

namespace rppo {

// Bad caller input: shapes, non-finite values, malformed files.
struct InvalidInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatchError : InvalidInputError {
  using InvalidInputError::InvalidInputError;
};

// Numerically unusable matrix (eigenvalue under the admissible floor).
struct DegenerateMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IllConditionedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateBatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsufficientDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad config file or command line; maps to exit code 2 in the CLI.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rppo
