#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace amap {

enum class ErrorCode {
  InvalidArgument,
  FileNotFound,
  IoError,
  MalformedTiff,
  MalformedMask,
  ChannelOutOfRange,
  SliceOutOfRange,
  ImageSmallerThanPatch,
  OutOfBounds,
  UncoveredPixel,
  DimensionMismatch,
  PatchSizeMismatch,
  ProviderFailure,
  UnknownInstance,
  ZeroPerimeter,
  ZeroVariance,
  TooFewPoints,
  NonpositiveMargin,
  InvalidDf,
  NonpositiveTime,
  SeedPlacementFailure,
  KeyMismatch,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::FileNotFound: return "FILE_NOT_FOUND";
    case ErrorCode::IoError: return "IO_ERROR";
    case ErrorCode::MalformedTiff: return "MALFORMED_TIFF";
    case ErrorCode::MalformedMask: return "MALFORMED_MASK";
    case ErrorCode::ChannelOutOfRange: return "CHANNEL_OUT_OF_RANGE";
    case ErrorCode::SliceOutOfRange: return "SLICE_OUT_OF_RANGE";
    case ErrorCode::ImageSmallerThanPatch: return "IMAGE_SMALLER_THAN_PATCH";
    case ErrorCode::OutOfBounds: return "OUT_OF_BOUNDS";
    case ErrorCode::UncoveredPixel: return "UNCOVERED_PIXEL";
    case ErrorCode::DimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::PatchSizeMismatch: return "PATCH_SIZE_MISMATCH";
    case ErrorCode::ProviderFailure: return "PROVIDER_FAILURE";
    case ErrorCode::UnknownInstance: return "UNKNOWN_INSTANCE";
    case ErrorCode::ZeroPerimeter: return "ZERO_PERIMETER";
    case ErrorCode::ZeroVariance: return "ZERO_VARIANCE";
    case ErrorCode::TooFewPoints: return "TOO_FEW_POINTS";
    case ErrorCode::NonpositiveMargin: return "NONPOSITIVE_MARGIN";
    case ErrorCode::InvalidDf: return "INVALID_DF";
    case ErrorCode::NonpositiveTime: return "NONPOSITIVE_TIME";
    case ErrorCode::SeedPlacementFailure: return "SEED_PLACEMENT_FAILURE";
    case ErrorCode::KeyMismatch: return "KEY_MISMATCH";
  }
  return "UNKNOWN";
}

/// Process exit code for each error class. 0 is success, 1 is reserved for
/// command-line usage errors, everything else is one code per class.
constexpr int exit_code(ErrorCode code) noexcept {
  return 10 + static_cast<int>(code);
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace amap
