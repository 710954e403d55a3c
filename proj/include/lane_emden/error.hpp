#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lane_emden {

enum class ErrorCode {
  InvalidArgument,
  FeatureTooSmall,
  DisconnectedInterior,
  NewtonStalled,
  ConvergedToZero,
  EigSolveFailed,
  CenterOutside,
  ContinuationStalled,
  NoZeroFound,
  CoincidentPoints,
  PointOutside,
  NoSolutionFound,
  NoPeaks,
  PeakUnresolved,
  EmptyTestSet,
  AnnulusUnresolved,
  BallOverlap,
  QuadratureUnresolved,
  IllConditionedFit,
  ConfigInvalid,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FeatureTooSmall: return "FeatureTooSmall";
    case ErrorCode::DisconnectedInterior: return "DisconnectedInterior";
    case ErrorCode::NewtonStalled: return "NewtonStalled";
    case ErrorCode::ConvergedToZero: return "ConvergedToZero";
    case ErrorCode::EigSolveFailed: return "EigSolveFailed";
    case ErrorCode::CenterOutside: return "CenterOutside";
    case ErrorCode::ContinuationStalled: return "ContinuationStalled";
    case ErrorCode::NoZeroFound: return "NoZeroFound";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::PointOutside: return "PointOutside";
    case ErrorCode::NoSolutionFound: return "NoSolutionFound";
    case ErrorCode::NoPeaks: return "NoPeaks";
    case ErrorCode::PeakUnresolved: return "PeakUnresolved";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::AnnulusUnresolved: return "AnnulusUnresolved";
    case ErrorCode::BallOverlap: return "BallOverlap";
    case ErrorCode::QuadratureUnresolved: return "QuadratureUnresolved";
    case ErrorCode::IllConditionedFit: return "IllConditionedFit";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI error record) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace lane_emden
