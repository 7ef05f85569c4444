#pragma once

#include <stdexcept>
#include <string>

namespace capshare {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInstance : Error {
  using Error::Error;
};

// A delay term needs a resource that was allocated as zero.
struct DivisionByZeroResource : Error {
  using Error::Error;
};

// Allocation violates a budget or placement-consistency invariant.
struct InfeasibleAllocation : Error {
  using Error::Error;
};

// An operation that needs per-task deadlines was called on an instance
// where some user has none.
struct MissingDeadline : Error {
  using Error::Error;
};

// Exhaustive search requested beyond the configured user cap.
struct TooLarge : Error {
  using Error::Error;
};

// Iterative solver stopped without meeting its tolerance.
struct NumericalFailure : Error {
  using Error::Error;
};

// SDP marginals needed more than cosmetic repair.
struct ClampExceedsTolerance : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(const std::string& msg, int line_arg)
      : Error(msg), line(line_arg) {}
  int line = 0;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace capshare
