#pragma once

#include <stdexcept>
#include <string>

namespace colabel {

// Invalid or inconsistent configuration / input. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: NaN/Inf in training, Cholesky breakdown, solver
// divergence. CLI exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reference-solution failure: quadrature or time stepper missed its
// self-consistency target. CLI exit code 4.
struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem problems (checkpoints, caches, artifacts). CLI exit code 2.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace colabel
