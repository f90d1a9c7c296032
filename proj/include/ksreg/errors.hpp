#pragma once

#include <stdexcept>
#include <string>

namespace ksreg {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments supplied by the caller (malformed vector, non-positive scale...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The state lies outside the domain of the requested operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class CollisionError : public DomainError {
 public:
  CollisionError() : DomainError("collision: position (or KS quaternion) is zero") {}
  using DomainError::DomainError;
};

class PoleError : public DomainError {
 public:
  PoleError() : DomainError("position antiparallel to the defining vector") {}
  using DomainError::DomainError;
};

class GaugeUndefined : public DomainError {
 public:
  using DomainError::DomainError;
};

class DegenerateState : public DomainError {
 public:
  using DomainError::DomainError;
};

class UnboundOrbit : public DomainError {
 public:
  using DomainError::DomainError;
};

class ConstraintViolation : public DomainError {
 public:
  using DomainError::DomainError;
};

// Iterative or stepping procedures that failed to finish.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class StepLimitExceeded : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace ksreg
