#pragma once

#include <stdexcept>
#include <string>

namespace qsky {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Operands cannot be combined (shared photon labels, mismatched bases).
class CompositionError : public Error {
 public:
  using Error::Error;
};

/// An operation would produce |l| above the configured OAM truncation.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Input data failed validation (files, parameters, preconditions).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure (rank deficiency, degenerate geometry, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace qsky
