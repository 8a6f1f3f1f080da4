#pragma once

#include <stdexcept>
#include <string>

namespace ofspc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or dimensionally inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A standing assumption on the system does not hold.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument to an otherwise well-defined operation.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Fixed-point iteration did not settle.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, double last_residual)
      : NumericalError(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

class DecompositionError : public Error {
 public:
  using Error::Error;
};

class ConditioningError : public DecompositionError {
 public:
  using DecompositionError::DecompositionError;
};

/// The orthogonal part of the system is not reachable from the input.
class UnreachableError : public DecompositionError {
 public:
  using DecompositionError::DecompositionError;
};

/// Operation has no meaning for this system (e.g. empty orthogonal part).
class NotApplicableError : public Error {
 public:
  using Error::Error;
};

/// A policy stage was evaluated before its innovations were available.
class CausalityError : public Error {
 public:
  using Error::Error;
};

class CacheError : public Error {
 public:
  enum class Kind { Io, Format, Checksum, Stale };
  CacheError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// QP data violates the solver's preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Something the theory rules out happened (e.g. an infeasible control QP).
class InternalContradiction : public Error {
 public:
  using Error::Error;
};

}  // namespace ofspc
