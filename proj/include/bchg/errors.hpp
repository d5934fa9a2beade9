#pragma once

#include <stdexcept>
#include <string>

namespace bchg {

// Bad shapes, incompatible method/task combinations, malformed configs.
struct ConfigurationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Out-of-range parameters (gamma >= 1, beta <= 0, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Fixed-point iteration did not reach the requested tolerance.
struct IterationLimitError : std::runtime_error {
  IterationLimitError(const std::string& what, double last_residual)
      : std::runtime_error(what), residual(last_residual) {}
  double residual;
};

// An estimator was asked for a key with no supporting samples.
struct MissingDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bchg
