#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fabconf {

/// Raised when an argument violates an operation's precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A linear-algebra step failed (singular or non-PD matrix).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Covariate matrix lacks full column rank for the areas used in a fit.
class RankDeficientError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An optimizer hit its iteration cap. Carries the best point it found.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best_point, double best_value)
      : std::runtime_error(what), best_point_(std::move(best_point)), best_value_(best_value) {}

  const std::vector<double>& best_point() const noexcept { return best_point_; }
  double best_value() const noexcept { return best_value_; }

 private:
  std::vector<double> best_point_;
  double best_value_;
};

}  // namespace fabconf
