// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace relmusic {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Index or range outside a tensor's extents.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// Invalid combination of hyperparameters or options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An operation was invoked in the wrong state (e.g. backward without a forward cache).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Malformed input document. Carries the 1-based line and column when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line == 0 ? what
                        : what + " (line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ")"),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Checkpoint missing, corrupt, or of an unsupported version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace relmusic
