#pragma once

#include <stdexcept>
#include <string>

namespace fconv {

/// Bad input: malformed measures, incompatible sizes, invalid flags.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical routine failed to produce an acceptable answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterate pushed a subordination argument out of the upper half-plane.
class DomainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Selects the OpenMP kernel or the serial reference loop.
enum class Execution { kParallel, kSerial };

}  // namespace fconv
