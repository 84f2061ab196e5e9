#pragma once

#include <stdexcept>
#include <string>

namespace framescope {

// Every error raised by the library derives from Error. kind() is a stable
// snake_case identifier that the CLI prints in its machine-readable error line.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape_error"; }
};

class ArgumentError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "argument_error"; }
};

// Adaptive pooling only reduces; a target larger than the input is rejected.
class UnsupportedUpsampleError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
  const char* kind() const noexcept override { return "unsupported_upsample"; }
};

// Dense S x S attention would exceed the configured memory cap.
class CapacityError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "capacity_error"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io_error"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format_error"; }
};

class BadMagicError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "bad_magic"; }
};

class UnsupportedVersionError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "unsupported_version"; }
};

class BadDtypeError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "bad_dtype"; }
};

class TruncatedError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "truncated"; }
};

// A zero dimension, or dimensions whose product overflows the address space.
class DimensionOverflowError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "dimension_overflow"; }
};

class TrailingDataError : public FormatError {
 public:
  using FormatError::FormatError;
  const char* kind() const noexcept override { return "trailing_data"; }
};

}  // namespace framescope
