#pragma once

#include <stdexcept>
#include <string>

namespace twistreg {

enum class ErrorCode {
  InvalidArgument,
  NucleusInsideSupport,
  BadRadii,
  NoConvergence,
  OutOfOmega,
  SingularGridPoint,
  BadCutoff,
  NotElliptic,
  CutoffExceeded,
  SingularPoint,
  BoundViolated,
  ZeroGradient,
  InsufficientMargin,
  TableTooShort,
  NotConverged,
  ConfigError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NucleusInsideSupport: return "NucleusInsideSupport";
    case ErrorCode::BadRadii: return "BadRadii";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::OutOfOmega: return "OutOfOmega";
    case ErrorCode::SingularGridPoint: return "SingularGridPoint";
    case ErrorCode::BadCutoff: return "BadCutoff";
    case ErrorCode::NotElliptic: return "NotElliptic";
    case ErrorCode::CutoffExceeded: return "CutoffExceeded";
    case ErrorCode::SingularPoint: return "SingularPoint";
    case ErrorCode::BoundViolated: return "BoundViolated";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
    case ErrorCode::InsufficientMargin: return "InsufficientMargin";
    case ErrorCode::TableTooShort: return "TableTooShort";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace twistreg
