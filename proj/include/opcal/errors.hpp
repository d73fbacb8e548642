#pragma once

#include <stdexcept>
#include <string>

namespace opcal {

// Base class for everything this library throws on purpose.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller passed inconsistent sizes, out-of-range orders, or otherwise
// malformed arguments.
struct argument_error : error {
  using error::error;
};

// Problems reading or interpreting a run configuration file.  The message
// carries file and line context.
struct config_error : error {
  using error::error;
};

// Strong ellipticity failed: a boundary root landed on the real axis, a
// coefficient matrix lost positivity, or the spectral parameter left the
// admissible sector.
struct ellipticity_error : error {
  using error::error;
};

// A documented precondition of a numerical routine failed at a concrete
// point; the message names the point.
struct precondition_error : error {
  using error::error;
};

// A computation produced non-finite values or failed its internal residual
// or conditioning check.
struct numerical_error : error {
  using error::error;
};

// A probe's own stability diagnostic rejected the result.
struct instability_error : error {
  using error::error;
};

}  // namespace opcal
