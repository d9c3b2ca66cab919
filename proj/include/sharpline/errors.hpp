#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sharpline {

// Root of every error this library raises. Callers that only care about
// "something went wrong in sharpline" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(const std::string& what, std::size_t expected, std::size_t got)
      : Error(what + ": expected length " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

// NaN or Inf surfaced where a finite value is required. `where` names the
// layer or quantity that produced it.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(std::string where)
      : Error("non-finite value in " + where), where_(std::move(where)) {}
  const std::string& where() const noexcept { return where_; }

 private:
  std::string where_;
};

class ZeroDirectionError : public Error {
 public:
  using Error::Error;
};

class DegenerateDenominatorError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOptimizerError : public Error {
 public:
  using Error::Error;
};

class NoBoundaryError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `location` is a line number for text formats and a
// byte offset for binary ones.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t location, const std::string& msg)
      : Error(path + ":" + std::to_string(location) + ": " + msg), location_(location) {}
  std::size_t location() const noexcept { return location_; }

 private:
  std::size_t location_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

}  // namespace sharpline
