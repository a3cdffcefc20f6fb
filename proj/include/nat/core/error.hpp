#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nat {

/// Root of the error hierarchy. The CLI maps subclasses onto exit codes:
/// ValidationError and ConfigError exit 1, IoError and TransportError exit 2.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

class ConfigError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Raised when a backend is asked for something it does not support
/// (e.g. token log-probabilities).
class CapabilityError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
public:
  using Error::Error;
};

class TransportError : public Error {
public:
  using Error::Error;
};

/// A malformed or invalid record in a line-oriented file.
class LineError : public ValidationError {
public:
  LineError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

}  // namespace nat
