#pragma once

#include <stdexcept>
#include <string>

namespace spectgnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (even kernel length, bad ratios, missing image...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input data is invalid (non-finite positions, gaps, out-of-bounds agents).
class DataError : public Error {
 public:
  using Error::Error;
};

/// An iterative numeric routine failed (non-convergence, NaN loss).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The scene exceeds a capacity fixed at model construction (N > N_max).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the offending line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace spectgnn
