#pragma once
// Error taxonomy. ConfigError maps to CLI exit code 2, NumericError to 3.

#include <stdexcept>
#include <string>

namespace satsol {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BracketError : NumericError {
  using NumericError::NumericError;
};

struct ConvergenceError : NumericError {
  using NumericError::NumericError;
};

// A nonpositive eigenvalue blocked a fractional power.
struct SpectralError : NumericError {
  SpectralError(const std::string& msg, double ev) : NumericError(msg), eigenvalue(ev) {}
  double eigenvalue;
};

// The scattering operator is close to singular (possible embedded resonance).
struct NearSingularError : NumericError {
  NearSingularError(const std::string& msg, double s) : NumericError(msg), sigma_min(s) {}
  double sigma_min;
};

// Picard iteration failed to contract.
struct ThresholdError : NumericError {
  using NumericError::NumericError;
};

// Two routes to the same quantity disagree beyond tolerance.
struct ConsistencyError : NumericError {
  ConsistencyError(const std::string& msg, double r) : NumericError(msg), residual(r) {}
  double residual;
};

// A small linear system (moment correctors) is too ill-conditioned to solve.
struct ConditioningError : NumericError {
  ConditioningError(const std::string& msg, double c) : NumericError(msg), condition(c) {}
  double condition;
};

}  // namespace satsol
