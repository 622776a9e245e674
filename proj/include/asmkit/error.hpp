#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace asmkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ASMKIT_DEFINE_ERROR(Name)        \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  }

ASMKIT_DEFINE_ERROR(DegenerateShape);
ASMKIT_DEFINE_ERROR(ShapeMismatch);
ASMKIT_DEFINE_ERROR(ParamMismatch);
ASMKIT_DEFINE_ERROR(InsufficientData);
ASMKIT_DEFINE_ERROR(RetentionUnsatisfiable);
ASMKIT_DEFINE_ERROR(BatchMismatch);
ASMKIT_DEFINE_ERROR(EpochOutOfRange);
ASMKIT_DEFINE_ERROR(InvalidConfig);
ASMKIT_DEFINE_ERROR(DimensionMismatch);
ASMKIT_DEFINE_ERROR(EmptyDataset);
ASMKIT_DEFINE_ERROR(EmptyInput);
ASMKIT_DEFINE_ERROR(DegenerateNormalizer);
ASMKIT_DEFINE_ERROR(IoError);

#undef ASMKIT_DEFINE_ERROR

/// Malformed text input. `line()` is 1-based; 0 means "whole input".
class FormatError : public Error {
 public:
  FormatError(std::size_t line, const std::string& reason)
      : Error(line == 0 ? reason : "line " + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

}  // namespace asmkit
