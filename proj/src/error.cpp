#include "qpspec/error.hpp"

namespace qpspec {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::RationalInput: return "RationalInput";
    case ErrorKind::PrecisionExhausted: return "PrecisionExhausted";
    case ErrorKind::InsufficientDepth: return "InsufficientDepth";
    case ErrorKind::GuardBetaZero: return "GuardBetaZero";
    case ErrorKind::DepthError: return "DepthError";
    case ErrorKind::DegenerateS: return "DegenerateS";
    case ErrorKind::OutOfWindow: return "OutOfWindow";
    case ErrorKind::SingularSite: return "SingularSite";
    case ErrorKind::NearSingularEnergy: return "NearSingularEnergy";
    case ErrorKind::InvalidK: return "InvalidK";
    case ErrorKind::AngleMismatch: return "AngleMismatch";
    case ErrorKind::RangeError: return "RangeError";
    case ErrorKind::DegenerateScale: return "DegenerateScale";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Cancellation: return "Cancellation";
    case ErrorKind::ResolutionFloor: return "ResolutionFloor";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::BetaZero: return "BetaZero";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::NoEigenvectorNearE: return "NoEigenvectorNearE";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace qpspec
