#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mmdebias {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed record in an input file. line() is 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Operation requires a model or object in a state it is not in (e.g. untrained).
class StateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Sampling from an empty candidate set.
class SamplingError : public Error {
 public:
  using Error::Error;
};

/// A statistic (mean, R^2) is undefined for the given input.
class UndefinedError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmdebias
