#pragma once

#include <stdexcept>
#include <string>

namespace gradband {

// Base for every error this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Random map generation ran out of attempts.
class GenerationFailure : public Error {
 public:
  using Error::Error;
};

// Malformed map text; line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& what)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class UndefinedPrecision : public Error {
 public:
  using Error::Error;
};

}  // namespace gradband
