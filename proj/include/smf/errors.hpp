#pragma once

#include <stdexcept>
#include <string>

namespace smf {

/// Bad configuration: dimension mismatches, invalid parameters, schema
/// violations.  Maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A state object violates a numerical invariant it is required to hold
/// (non-projector density, negative spatial density, stale spectra...).
/// Maps to CLI exit code 3.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Self-consistency iteration failed to converge; carries the final residual.
struct ConvergenceError : std::runtime_error {
  ConvergenceError(const std::string& what, double residual_)
      : std::runtime_error(what), residual(residual_) {}
  double residual;
};

/// A single stochastic trajectory became numerically unusable (singular
/// overlap, rank loss).  Caught by the ensemble driver and counted.
struct TrajectoryAbort : std::runtime_error {
  explicit TrajectoryAbort(const std::string& what) : std::runtime_error(what) {}
};

/// Operation not defined for this model/ensemble kind.
struct UnsupportedOperation : std::runtime_error {
  explicit UnsupportedOperation(const std::string& what) : std::runtime_error(what) {}
};

/// More than the tolerated fraction of trajectories aborted; the ensemble
/// statistics are not trustworthy.  Maps to CLI exit code 4.
struct ExcessiveAborts : std::runtime_error {
  ExcessiveAborts(const std::string& what, int aborted_, int total_)
      : std::runtime_error(what), aborted(aborted_), total(total_) {}
  int aborted;
  int total;
};

}  // namespace smf
