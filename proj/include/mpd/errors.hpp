#pragma once

#include <stdexcept>
#include <string>

namespace mpd {

/// Thrown when an operation is called with arguments outside its contract
/// (dimension mismatch, non-positive variance, empty cloud, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown by the Gaussian moment flow when the covariance loses positive
/// definiteness; the caller should retry with a smaller step.
class StepSizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace mpd
