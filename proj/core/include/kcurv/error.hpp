#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kcurv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text. Carries the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Invalid input data: bad metric specs, mismatched operands, unknown names.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// A hypothesis of a computation does not hold at the probed data
/// (e.g. a profile derivative that must be positive is not).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Floating point failure: non-finite values, singular matrices, step collapse.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcurv
