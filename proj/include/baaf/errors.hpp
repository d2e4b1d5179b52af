#pragma once

#include <stdexcept>
#include <string>

namespace baaf {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration (bad n, empty input, dimension mismatch).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (duplicate ids, missing labels, NaN).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Payload size does not match the declared shape.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Numerical degeneracy: identical GMM components, everything filtered out.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Covariance could not be factorized.
class SingularityError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

}  // namespace baaf
