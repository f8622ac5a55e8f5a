#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stoshield {

/// Base of every error raised by the toolkit. The CLI maps subclasses onto
/// exit codes (see `exit_code_for`).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration and input errors (exit code 2).

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed network file or invalid network definition. `field` holds a
/// JSON-pointer style location when one is known.
class SchemaError : public ConfigError {
 public:
  SchemaError(const std::string& message, std::string field = {})
      : ConfigError(field.empty() ? message : field + ": " + message),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class IrreducibleViolation : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class IndexError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Numerical errors (exit code 3).

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateKernel : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DefectiveMatrix : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SpectralSingularity : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A step-size guard failed. `suggested()` is a step that satisfies it.
class StepSizeError : public NumericalError {
 public:
  StepSizeError(const std::string& message, double suggested)
      : NumericalError(message), suggested_(suggested) {}
  double suggested() const noexcept { return suggested_; }

 private:
  double suggested_;
};

class StabilityError : public StepSizeError {
 public:
  using StepSizeError::StepSizeError;
};

class TauTooLarge : public StepSizeError {
 public:
  using StepSizeError::StepSizeError;
};

class StepTooLarge : public StepSizeError {
 public:
  using StepSizeError::StepSizeError;
};

// Sampling errors (exit code 4).

class ConnectivityError : public Error {
 public:
  ConnectivityError(const std::string& message, std::size_t rejections)
      : Error(message), rejections_(rejections) {}
  std::size_t rejections() const noexcept { return rejections_; }

 private:
  std::size_t rejections_;
};

}  // namespace stoshield
