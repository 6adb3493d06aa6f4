#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qpspec {

enum class ErrorKind {
  // arithmetic
  RationalInput,
  PrecisionExhausted,
  InsufficientDepth,
  GuardBetaZero,
  DepthError,
  DegenerateS,
  OutOfWindow,
  // model
  SingularSite,
  NearSingularEnergy,
  InvalidK,
  // dynamics
  AngleMismatch,
  RangeError,
  DegenerateScale,
  // spectral
  NoConvergence,
  Cancellation,
  ResolutionFloor,
  EmptyWindow,
  // dimension
  BetaZero,
  EmptySample,
  // verify
  NoEigenvectorNearE,
  // general
  InvalidArgument,
  ConfigError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when the potential is evaluated at a pole; carries the lattice site.
class SingularSiteError : public Error {
 public:
  SingularSiteError(std::int64_t site, const std::string& what)
      : Error(ErrorKind::SingularSite, what), site_(site) {}

  std::int64_t site() const noexcept { return site_; }

 private:
  std::int64_t site_;
};

/// Raised when E is too close to spec(H_I); `distance` is the measured gap.
class NearSingularEnergyError : public Error {
 public:
  NearSingularEnergyError(double distance, const std::string& what)
      : Error(ErrorKind::NearSingularEnergy, what), distance_(distance) {}

  double distance() const noexcept { return distance_; }

 private:
  double distance_;
};

}  // namespace qpspec
