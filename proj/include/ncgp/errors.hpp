#pragma once

#include <stdexcept>
#include <string>

namespace ncgp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A covariance could not be factorized even after the full jitter ladder.
class NonPSDCovariance : public Error {
 public:
  using Error::Error;
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class InvalidCount : public Error {
 public:
  using Error::Error;
};

/// A curve parameter or time value outside [0, 1].
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Training data that cannot support the requested model (e.g. K > 1 on identical samples).
class DegenerateData : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ncgp
