#pragma once

#include <stdexcept>
#include <string>

namespace plshield {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Syntax or validation error in a program text, with source position.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int col)
      : Error(msg + " (line " + std::to_string(line) + ", column " + std::to_string(col) + ")"),
        line(line),
        col(col) {}
  int line;
  int col;
};

/// Grounding failed: undefined query, unbounded variable, size budget, cycle.
class GroundError : public Error {
 public:
  using Error::Error;
};

/// Circuit compilation exceeded its node budget or received an invalid program.
class CompileError : public Error {
 public:
  using Error::Error;
};

/// A valuation, distribution or reading does not match the expected shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Conditioning on evidence whose probability is zero.
class EvidenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration file or run specification.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace plshield
