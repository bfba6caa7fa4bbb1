#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sparsefoot {

enum class ErrorCode {
  InvalidSpec,
  SpecInfeasible,
  EmptyRegion,
  InvalidPose,
  RateMismatch,
  OutOfBounds,
  EmptyLog,
  NoValidCells,
  CameraMismatch,
  NoFoothold,
  InsufficientData,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::SpecInfeasible: return "SpecInfeasible";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::RateMismatch: return "RateMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyLog: return "EmptyLog";
    case ErrorCode::NoValidCells: return "NoValidCells";
    case ErrorCode::CameraMismatch: return "CameraMismatch";
    case ErrorCode::NoFoothold: return "NoFoothold";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure the library signals carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sparsefoot
