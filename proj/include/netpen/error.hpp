#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace netpen {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveDepth,
  PixelOutOfBounds,
  BehindCamera,
  BadPatchSize,
  ImageTooSmall,
  InsufficientPoints,
  DegeneratePoints,
  IllConditioned,
  TooFewValidPixels,
  NonPositiveRange,
  NoPriors,
  DimensionMismatch,
  NoOverlap,
  NotConverged,
  DegenerateCenter,
  NonPositiveDt,
  PoseOutsidePen,
  OutOfVolume,
  UnreachableSetpoint,
  EvenWindow,
  WindowTooLarge,
  LengthMismatch,
  ConfigError,
  DatasetError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::PixelOutOfBounds: return "PixelOutOfBounds";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::BadPatchSize: return "BadPatchSize";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::DegeneratePoints: return "DegeneratePoints";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::TooFewValidPixels: return "TooFewValidPixels";
    case ErrorCode::NonPositiveRange: return "NonPositiveRange";
    case ErrorCode::NoPriors: return "NoPriors";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::DegenerateCenter: return "DegenerateCenter";
    case ErrorCode::NonPositiveDt: return "NonPositiveDt";
    case ErrorCode::PoseOutsidePen: return "PoseOutsidePen";
    case ErrorCode::OutOfVolume: return "OutOfVolume";
    case ErrorCode::UnreachableSetpoint: return "UnreachableSetpoint";
    case ErrorCode::EvenWindow: return "EvenWindow";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DatasetError: return "DatasetError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace netpen
