#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace qpspec::dynamics {

/// Solution of u(n+1) + u(n-1) + V(n) u(n) = E u(n) on [n_lo, n_hi] with
/// u(0) = -sin theta, u(1) = cos theta. Values are stored as
/// u(n) = mantissa(n) * exp(log_scale(n)); the scale changes whenever the
/// running pair is renormalized.
struct SolutionTrace {
  double theta = 0.0;
  double energy = 0.0;
  std::int64_t n_lo = 0;
  std::int64_t n_hi = -1;
  std::vector<double> mantissa;
  std::vector<double> log_scale;

  bool covers(std::int64_t n) const { return n >= n_lo && n <= n_hi; }
  std::size_t index(std::int64_t n) const;
  /// u(n) as a double (may be +-inf for very large solutions).
  double value(std::int64_t n) const;
  /// log|u(n)|, -inf when u(n) = 0.
  double log_abs(std::int64_t n) const;
  /// u(n) * exp(-shift).
  double scaled(std::int64_t n, double shift) const;
};

}  // namespace qpspec::dynamics
