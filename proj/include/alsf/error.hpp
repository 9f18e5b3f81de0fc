#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace alsf {

enum class ErrorCode {
  kDimensionMismatch,
  kNonFiniteInput,
  kInvalidArgument,
  kInsufficientData,
  kDegenerateInit,
  kWeightError,
  kRankError,
  kShapeMismatch,
  kEmptyGrid,
  kDegenerateLabels,
  kIoError,
  kUnsupportedFormat,
  kCorruptImage,
  kUpsampleRequested,
  kNoValidPlacement,
  kImageTooSmall,
  kEmptyClass,
  kDimensionError,
  kVersionMismatch,
  kChecksumFailure,
  kConfigError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so
// callers (tests, the CLI exit-status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace alsf
