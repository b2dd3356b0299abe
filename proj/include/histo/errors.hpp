#pragma once

#include <stdexcept>
#include <string>

namespace histo {

enum class ErrorCode {
  InsufficientTissue,
  DegenerateStains,
  BadMagic,
  BadVersion,
  TruncatedFile,
  ShapeMismatch,
  InputTooSmall,
  InvalidClassCount,
  EmptyClass,
  BadPatchSize,
  UnreadableImage,
  BatchTooSmall,
  PaletteTooSmall,
  UnmappedClass,
  LengthMismatch,
  EmptyInput,
  UnknownKey,
  MalformedLine,
  InvalidArgument,
  IoError,
};

/// All library failures surface as Error; code() identifies the condition.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace histo
