#pragma once

#include <stdexcept>

namespace mgcn {

// Invalid settings or infeasible requests. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed, inconsistent or unreadable input files. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operand shapes incompatible with an operation or a stored model. CLI exit code 3.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values reached the optimizer or loss. CLI exit code 4.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mgcn
