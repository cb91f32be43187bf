#pragma once

#include <stdexcept>
#include <string>

namespace sdmd {

// Base type for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid user-facing configuration (CLI maps this to exit code 4).
struct ConfigError : Error {
  using Error::Error;
};

// Contract violation on a direct API call (bad shapes, bad parameters).
struct InvalidArgument : Error {
  using Error::Error;
};

// Numerical failures (CLI maps these to exit code 3).
struct NumericalError : Error {
  using Error::Error;
};

// A trajectory left the representable range.
struct OverflowError : NumericalError {
  using NumericalError::NumericalError;
};

// Regularized Gram matrix is not positive definite.
struct SingularGramError : NumericalError {
  using NumericalError::NumericalError;
};

// Training loss became non-finite.
struct DivergenceError : NumericalError {
  using NumericalError::NumericalError;
};

// Too few samples for the requested fit.
struct InsufficientDataError : NumericalError {
  using NumericalError::NumericalError;
};

// Evaluation outside the mathematical domain (e.g. radius <= 0).
struct DomainError : NumericalError {
  using NumericalError::NumericalError;
};

// The requested quantity does not exist for this model or dictionary.
struct NotAvailableError : Error {
  using Error::Error;
};

// A built-in consistency check failed (CLI maps this to exit code 2).
struct InvariantFailure : Error {
  using Error::Error;
};

}  // namespace sdmd
