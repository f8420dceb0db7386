#pragma once

#include <stdexcept>
#include <string>

namespace drht {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes disagree with what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN/Inf was produced or consumed where finite values are required.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument or precondition violation that is not a shape problem.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Image file errors. Each failure mode has its own type so callers and
/// tests can tell a bad header from a short payload.
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class MalformedHeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedPayloadError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Pixel is NaN/Inf, or negative where radiance is expected.
class InvalidPixelError : public FormatError {
 public:
  using FormatError::FormatError;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace drht
