#ifndef XOVA_ERROR_HPP
#define XOVA_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace xova {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Bad or inconsistent configuration (unknown flags, missing bias feature, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation not allowed in the object's current state.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// Non-finite value encountered during optimization.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

} // namespace xova

#endif // XOVA_ERROR_HPP
