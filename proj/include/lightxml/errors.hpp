#pragma once

#include <stdexcept>
#include <string>

namespace lightxml {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or incompatible inputs supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A precondition or internal invariant was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Optimizer or training loop reached an unusable state (missing grads, NaN loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value detected while finite checks are enabled.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad command-line usage or missing input file.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace lightxml
