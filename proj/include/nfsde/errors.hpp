#pragma once

#include <stdexcept>
#include <string>

namespace nfsde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition on an argument is violated (off-grid time, grid mismatch,
/// parameter outside its admissible range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point or iterative solver ran out of iterations.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Non-finite value produced by a coefficient or an integrator.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Sampling-based estimator had nothing usable to work with.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Problem too large for the requested solver.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected before any computation. Carries the offending field.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& rule)
      : Error(field + ": " + rule), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A declared regularity constant was falsified by the assumption checkers.
class CheckerFailure : public Error {
 public:
  CheckerFailure(std::string assumption, const std::string& detail)
      : Error(assumption + " violated: " + detail), assumption_(std::move(assumption)) {}
  const std::string& assumption() const noexcept { return assumption_; }

 private:
  std::string assumption_;
};

}  // namespace nfsde
