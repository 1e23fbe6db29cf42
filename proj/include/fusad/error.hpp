#pragma once

#include <stdexcept>
#include <string>

namespace fusad {

/// Base of every error the library raises. `exit_code()` maps the error onto
/// the CLI contract: 1 usage/config, 2 data, 3 numerical failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Incompatible tensor extents.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition (non-scalar backward, grid mismatch...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Positional table too small for the requested token count.
class CapacityError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Bad input values or sizes (empty series, window larger than series...).
class InputError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Malformed data file; the message names the row and column.
class ParseError : public InputError {
 public:
  using InputError::InputError;
};

/// Checkpoint could not be read (truncated, corrupt, wrong version, shape mismatch).
class LoadError : public InputError {
 public:
  using InputError::InputError;
};

/// NaN/Inf surfaced in a loss, gradient or intermediate.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

}  // namespace fusad
