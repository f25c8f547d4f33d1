#pragma once

#include <stdexcept>
#include <string>

namespace dchaos {

/// Bad argument values (out-of-range order, negative N, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A denominator of a variational functional is nonpositive.
class AdmissibilityError : public std::domain_error {
 public:
  AdmissibilityError(const std::string& what, double location)
      : std::domain_error(what), location_(location) {}
  double location() const noexcept { return location_; }

 private:
  double location_;
};

/// A Gaussian log-moment does not exist (n*v >= L).
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The inputs do not satisfy a mathematical precondition (e.g. no sign change
/// of the fixed-point function, which signals a non-optimal (x, b)).
class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Iterative numerics failed to converge.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (CLI, memory budgets).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace dchaos
