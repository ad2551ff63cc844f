#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tti {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A text input could not be parsed. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Lookup of an unknown image id, profession or cluster.
class NotFoundError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A binary artifact is malformed: bad magic, truncated payload, bad values.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Remote inference endpoint rejected or could not serve a request.
class GatewayError : public Error {
 public:
  using Error::Error;
};

}  // namespace tti
