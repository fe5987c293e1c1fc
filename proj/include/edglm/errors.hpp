#ifndef EDGLM_ERRORS_HPP
#define EDGLM_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace edglm {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside a support or parameter domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite intermediate or an ill-posed numerical quantity.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A conjugate update produced parameters outside the admissible region.
class ConjugacyError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

// Curvature at the reported mode is not negative definite.
class LaplaceError : public Error {
 public:
  using Error::Error;
};

// Quadrature box could not be grown to cover the integrand mass.
class CoverageError : public Error {
 public:
  using Error::Error;
};

// Inconsistent dimensions between states, designs and overrides.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Singular Q or R after jitter.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

class EquateError : public Error {
 public:
  EquateError(const std::string& what, double objective)
      : Error(what), objective_(objective) {}
  double objective() const noexcept { return objective_; }

 private:
  double objective_;
};

// Lagged covariate references that cannot be resolved at a time index.
class WarmupError : public Error {
 public:
  using Error::Error;
};

// Future covariates required for a forecast horizon are missing.
class HorizonError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Failure inside the filtering recursion, tagged with where it happened.
class FilterError : public Error {
 public:
  FilterError(std::size_t time_index, std::string step, const std::string& cause)
      : Error("filter failed at t=" + std::to_string(time_index) + " in " + step +
              ": " + cause),
        time_index_(time_index),
        step_(std::move(step)) {}

  std::size_t time_index() const noexcept { return time_index_; }
  const std::string& step() const noexcept { return step_; }

 private:
  std::size_t time_index_;
  std::string step_;
};

}  // namespace edglm

#endif  // EDGLM_ERRORS_HPP
