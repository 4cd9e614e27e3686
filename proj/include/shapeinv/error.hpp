#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shapeinv {

enum class ErrorCode {
  EmptyCloud,
  NonFinite,
  KTooLarge,
  CountTooLarge,
  BadStart,
  BadArgument,
  CloudTooSmall,
  SizeMismatch,
  ShapeMismatch,
  ArchMismatch,
  EmptyMask,
  NoCandidates,
  ParseError,
  CheckpointError,
  IoError,
  ConfigError,
  Diverged,
  NonPositiveEpsilon,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::CountTooLarge: return "CountTooLarge";
    case ErrorCode::BadStart: return "BadStart";
    case ErrorCode::BadArgument: return "BadArgument";
    case ErrorCode::CloudTooSmall: return "CloudTooSmall";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ArchMismatch: return "ArchMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::CheckpointError: return "CheckpointError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::NonPositiveEpsilon: return "NonPositiveEpsilon";
  }
  return "Unknown";
}

}  // namespace shapeinv
