#pragma once

#include <stdexcept>
#include <string>

namespace scglr {

// Invalid inputs: bad files, malformed config, dimension mismatches,
// out-of-range hyperparameters.  CLI maps these to exit code 1.
class UserError : public std::runtime_error {
 public:
  explicit UserError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures of the numerics themselves: singular systems, collapsed
// variances, non-convergence treated as fatal.  CLI maps these to exit
// code 2.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown by the variance update when its denominator is non-positive;
// callers restart the affected response from the variance floor.
class VarianceCollapse : public NumericalError {
 public:
  explicit VarianceCollapse(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace scglr
