#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gblab {

/// Invalid user-supplied parameter (bad lambda, out-of-range s, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two objects that must share a lattice or grid do not.
class GridMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two independent evaluation paths disagree beyond tolerance.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Enumeration exceeded its safety cap.
class OverflowGuard : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Picard iteration failed to contract; carries the ratio history.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(const std::string& what, std::vector<double> ratios)
      : std::runtime_error(what), ratios_(std::move(ratios)) {}
  const std::vector<double>& ratios() const noexcept { return ratios_; }

 private:
  std::vector<double> ratios_;
};

/// Reference integrator local error estimate above tolerance.
class StepRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gblab
