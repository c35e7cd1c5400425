#pragma once

#include <stdexcept>
#include <string>

namespace invreg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Covariance (plain or weighted) too close to singular to whiten.
class SingularCovariance : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of the operation (u outside [0,1], H > n, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Process or matrix shapes that cannot be combined.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

/// Basis expected to have orthonormal columns but does not.
class OrthoError : public Error {
 public:
  using Error::Error;
};

/// Repeated singular weighted covariances exhausted the retry budget.
class BootstrapAbort : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace invreg
