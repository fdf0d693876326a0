#pragma once

#include <stdexcept>
#include <string>

namespace copr {

enum class ErrorCode {
  ZeroQuaternion,
  InvalidPose,
  DimMismatch,
  EmptyMap,
  DuplicateId,
  NonFinite,
  BadMagic,
  VersionUnsupported,
  CountMismatch,
  ParseError,
  RefusedNonFinite,
  IoError,
  InvalidConfig,
  CoincidentAnchors,
  TooFewNeighbors,
  TooFewAnchors,
  MethodPlanMismatch,
  UnknownId,
  ShapeMismatch,
  EmptyTrainingSet,
  ZeroVector,
  InsufficientScenes,
  ConfigConflict,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroQuaternion: return "ZeroQuaternion";
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::EmptyMap: return "EmptyMap";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::RefusedNonFinite: return "RefusedNonFinite";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CoincidentAnchors: return "CoincidentAnchors";
    case ErrorCode::TooFewNeighbors: return "TooFewNeighbors";
    case ErrorCode::TooFewAnchors: return "TooFewAnchors";
    case ErrorCode::MethodPlanMismatch: return "MethodPlanMismatch";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientScenes: return "InsufficientScenes";
    case ErrorCode::ConfigConflict: return "ConfigConflict";
  }
  return "Unknown";
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace copr
