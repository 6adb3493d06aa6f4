#include "qpspec/dynamics.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <random>

#include "qpspec/error.hpp"

namespace qpspec::dynamics {

namespace {

constexpr double kRenormUp = 1e13;     // ~ e^30
constexpr double kRenormDown = 1e-13;  // ~ e^-30

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

}  // namespace

std::string_view to_string(Side s) { return s == Side::Plus ? "+" : "-"; }

std::size_t SolutionTrace::index(std::int64_t n) const {
  if (!covers(n))
    throw Error(ErrorKind::RangeError, "site " + std::to_string(n) + " outside the trace [" +
                                           std::to_string(n_lo) + ", " + std::to_string(n_hi) +
                                           "]");
  return static_cast<std::size_t>(n - n_lo);
}

double SolutionTrace::value(std::int64_t n) const {
  const std::size_t i = index(n);
  return mantissa[i] * std::exp(log_scale[i]);
}

double SolutionTrace::log_abs(std::int64_t n) const {
  const std::size_t i = index(n);
  if (mantissa[i] == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(std::fabs(mantissa[i])) + log_scale[i];
}

double SolutionTrace::scaled(std::int64_t n, double shift) const {
  const std::size_t i = index(n);
  if (mantissa[i] == 0.0) return 0.0;
  return mantissa[i] * std::exp(log_scale[i] - shift);
}

Mat2 transfer_matrix(const model::OperatorPoint& op, double E, std::int64_t n) {
  return Mat2{{{E - op.potential(n), -1.0}, {1.0, 0.0}}};
}

double operator_norm(const Mat2& m) {
  const double a = m[0][0], b = m[0][1], c = m[1][0], d = m[1][1];
  return 0.5 * (std::hypot(a + d, c - b) + std::hypot(a - d, b + c));
}

namespace {

void rescale(Mat2& m, double& log_scale) {
  double big = 0.0;
  for (const auto& row : m)
    for (double v : row) big = std::max(big, std::fabs(v));
  if (big > kRenormUp || (big < kRenormDown && big > 0.0)) {
    for (auto& row : m)
      for (double& v : row) v /= big;
    log_scale += std::log(big);
  }
}

}  // namespace

CocycleProduct cocycle_product(const model::OperatorPoint& op, double E, std::int64_t n) {
  Mat2 m{{{1.0, 0.0}, {0.0, 1.0}}};
  double log_scale = 0.0;
  if (n >= 1) {
    for (std::int64_t k = 1; k <= n; ++k) {
      const double t = E - op.potential(k);
      const double r0 = t * m[0][0] - m[1][0];
      const double r1 = t * m[0][1] - m[1][1];
      m[1] = m[0];
      m[0] = {r0, r1};
      rescale(m, log_scale);
    }
  } else if (n <= -1) {
    // T^{-1} = [[0, 1], [-1, E - V]]
    for (std::int64_t k = 0; k >= n + 1; --k) {
      const double t = E - op.potential(k);
      const double r1 = -m[0][0] + t * m[1][0];
      const double r1b = -m[0][1] + t * m[1][1];
      m[0] = m[1];
      m[1] = {r1, r1b};
      rescale(m, log_scale);
    }
  }
  return {m, log_scale};
}

CocycleNorm cocycle_lognorm(const model::OperatorPoint& op, double E, std::int64_t n) {
  const auto [m, log_scale] = cocycle_product(op, E, n);
  CocycleNorm out;
  const double s = operator_norm(m);
  out.log_norm = std::log(s) + log_scale;
  // right singular vector: eigenvector of M^T M for the top eigenvalue
  const double p = m[0][0] * m[0][0] + m[1][0] * m[1][0];
  const double q = m[0][0] * m[0][1] + m[1][0] * m[1][1];
  const double r = m[0][1] * m[0][1] + m[1][1] * m[1][1];
  const double phi = 0.5 * std::atan2(2.0 * q, p - r);
  out.direction = {std::cos(phi), std::sin(phi)};
  return out;
}

namespace {

struct PhaseValues {
  std::vector<double> values;
  std::vector<unsigned char> skipped;
};

PhaseValues phase_values(const model::OperatorPoint& base, double E, std::int64_t n,
                         std::size_t phase_count, std::uint64_t seed, bool parallel) {
  if (n < 1000) throw Error(ErrorKind::InvalidArgument, "Lyapunov average needs n >= 1000");
  if (phase_count < 32) throw Error(ErrorKind::InvalidArgument, "need at least 32 phases");
  std::mt19937_64 gen(seed);
  const double step = 1.0 / static_cast<double>(phase_count);
  const double x0 = std::uniform_real_distribution<double>(0.0, step)(gen);
  PhaseValues out;
  out.values.assign(phase_count, 0.0);
  out.skipped.assign(phase_count, 0);
  std::exception_ptr failure;
  const auto count = static_cast<std::int64_t>(phase_count);
#pragma omp parallel for schedule(static) if (parallel)
  for (std::int64_t j = 0; j < count; ++j) {
    try {
      const double x = x0 + static_cast<double>(j) * step;
      model::OperatorPoint op(base.spec(), base.alpha_hi(), base.alpha_lo(), x);
      out.values[static_cast<std::size_t>(j)] =
          cocycle_lognorm(op, E, n).log_norm / static_cast<double>(n);
    } catch (const SingularSiteError&) {
      out.skipped[static_cast<std::size_t>(j)] = 1;
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

LyapunovResult reduce(const PhaseValues& pv, double E, std::int64_t n) {
  LyapunovResult r;
  r.energy = E;
  r.n = n;
  r.phases = pv.values.size();
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t j = 0; j < pv.values.size(); ++j) {
    if (pv.skipped[j]) {
      ++r.skipped;
      continue;
    }
    sum += pv.values[j];
    ++used;
  }
  if (10 * r.skipped > r.phases)
    throw Error(ErrorKind::SingularSite,
                std::to_string(r.skipped) + " of " + std::to_string(r.phases) +
                    " phases hit a pole (more than 10%)");
  r.L_hat = sum / static_cast<double>(used);
  double ss = 0.0;
  for (std::size_t j = 0; j < pv.values.size(); ++j)
    if (!pv.skipped[j]) ss += (pv.values[j] - r.L_hat) * (pv.values[j] - r.L_hat);
  r.stderr_ = used > 1 ? std::sqrt(ss / static_cast<double>(used - 1) / static_cast<double>(used))
                       : 0.0;
  return r;
}

}  // namespace

LyapunovResult lyapunov(const model::OperatorPoint& base, double E, std::int64_t n,
                        std::size_t phase_count, std::uint64_t seed) {
  return reduce(phase_values(base, E, n, phase_count, seed, true), E, n);
}

LyapunovResult lyapunov(const model::PotentialSpec& spec, const arithmetic::CFExpansion& alpha,
                        double E, std::int64_t n, std::size_t phase_count, std::uint64_t seed) {
  return lyapunov(model::OperatorPoint(spec, alpha, 0.0), E, n, phase_count, seed);
}

LyapunovResult lyapunov_serial(const model::OperatorPoint& base, double E, std::int64_t n,
                               std::size_t phase_count, std::uint64_t seed) {
  return reduce(phase_values(base, E, n, phase_count, seed, false), E, n);
}

namespace {

std::vector<LyapunovResult> sweep(const model::OperatorPoint& base,
                                  std::span<const double> energies, std::int64_t n,
                                  std::size_t phase_count, std::uint64_t seed, bool parallel) {
  std::vector<LyapunovResult> out(energies.size());
  std::exception_ptr failure;
  const auto count = static_cast<std::int64_t>(energies.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      const auto k = static_cast<std::size_t>(i);
      out[k] = reduce(phase_values(base, energies[k], n, phase_count, seed, false), energies[k], n);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

std::vector<LyapunovResult> lyapunov_sweep(const model::OperatorPoint& base,
                                           std::span<const double> energies, std::int64_t n,
                                           std::size_t phase_count, std::uint64_t seed) {
  return sweep(base, energies, n, phase_count, seed, true);
}

std::vector<LyapunovResult> lyapunov_sweep_serial(const model::OperatorPoint& base,
                                                  std::span<const double> energies,
                                                  std::int64_t n, std::size_t phase_count,
                                                  std::uint64_t seed) {
  return sweep(base, energies, n, phase_count, seed, false);
}

SolutionTrace solve_from(const model::OperatorPoint& op, double E, std::int64_t anchor,
                         std::array<double, 2> pair, std::int64_t n_lo, std::int64_t n_hi) {
  if (!(n_lo <= anchor && anchor + 1 <= n_hi))
    throw Error(ErrorKind::RangeError, "range must contain the anchor pair");
  SolutionTrace tr;
  tr.energy = E;
  tr.n_lo = n_lo;
  tr.n_hi = n_hi;
  const auto size = static_cast<std::size_t>(n_hi - n_lo + 1);
  tr.mantissa.assign(size, 0.0);
  tr.log_scale.assign(size, 0.0);
  auto at = [&](std::int64_t n) { return static_cast<std::size_t>(n - n_lo); };
  tr.mantissa[at(anchor)] = pair[0];
  tr.mantissa[at(anchor + 1)] = pair[1];

  auto renorm = [](double& a, double& b, double& scale) {
    const double norm = std::hypot(a, b);
    if (norm > kRenormUp || (norm < kRenormDown && norm > 0.0)) {
      a /= norm;
      b /= norm;
      scale += std::log(norm);
    }
  };

  // forward: u(n+1) = (E - V(n)) u(n) - u(n-1)
  {
    double prev = pair[0], cur = pair[1], scale = 0.0;
    for (std::int64_t n = anchor + 1; n < n_hi; ++n) {
      const double next = (E - op.potential(n)) * cur - prev;
      prev = cur;
      cur = next;
      renorm(prev, cur, scale);
      tr.mantissa[at(n + 1)] = cur;
      tr.log_scale[at(n + 1)] = scale;
    }
  }
  // backward: u(n-1) = (E - V(n)) u(n) - u(n+1)
  {
    double prev = pair[1], cur = pair[0], scale = 0.0;
    for (std::int64_t n = anchor; n > n_lo; --n) {
      const double next = (E - op.potential(n)) * cur - prev;
      prev = cur;
      cur = next;
      renorm(prev, cur, scale);
      tr.mantissa[at(n - 1)] = cur;
      tr.log_scale[at(n - 1)] = scale;
    }
  }
  return tr;
}

SolutionTrace solve_theta(const model::OperatorPoint& op, double E, double theta,
                          std::int64_t n_lo, std::int64_t n_hi) {
  if (n_lo > 0 || n_hi < 1) throw Error(ErrorKind::RangeError, "range must contain 0 and 1");
  auto tr = solve_from(op, E, 0, {-std::sin(theta), std::cos(theta)}, n_lo, n_hi);
  tr.theta = theta;
  return tr;
}

double complementary_angle(double theta) {
  double t = std::fmod(theta + 0.5 * std::numbers::pi, std::numbers::pi);
  if (t < 0) t += std::numbers::pi;
  return t;
}

double wronskian_residual(const SolutionTrace& u, const SolutionTrace& v, std::int64_t n) {
  double d = std::remainder(v.theta - u.theta - 0.5 * std::numbers::pi, std::numbers::pi);
  if (std::fabs(d) > 1e-9)
    throw Error(ErrorKind::AngleMismatch, "second trace must carry angle theta + pi/2 mod pi");
  if (u.energy != v.energy)
    throw Error(ErrorKind::AngleMismatch, "traces solve at different energies");
  const double expected = std::sin(v.theta - u.theta) > 0 ? 1.0 : -1.0;
  const double l1 = u.log_abs(n) + v.log_abs(n + 1);
  const double l2 = u.log_abs(n + 1) + v.log_abs(n);
  const double shift = std::max({l1, l2, 0.0});
  auto term = [&](const SolutionTrace& a, std::int64_t i, const SolutionTrace& b, std::int64_t j,
                  double l) {
    if (l == -std::numeric_limits<double>::infinity()) return 0.0;
    const double s = (a.mantissa[a.index(i)] < 0) != (b.mantissa[b.index(j)] < 0) ? -1.0 : 1.0;
    return s * std::exp(l - shift);
  };
  const double t1 = term(u, n, v, n + 1, l1);
  const double t2 = term(u, n + 1, v, n, l2);
  const double w = t1 - t2;
  const double denom = std::max(std::exp(-shift), std::fabs(t1) + std::fabs(t2));
  return std::fabs(w - expected * std::exp(-shift)) / denom;
}

double log_truncated_norm(const SolutionTrace& u, double L, Side sign) {
  if (!(L >= 0.0) || !std::isfinite(L)) throw Error(ErrorKind::RangeError, "L must be >= 0");
  const auto F = static_cast<std::int64_t>(std::floor(L));
  const double frac = L - static_cast<double>(F);
  double acc = -std::numeric_limits<double>::infinity();
  if (sign == Side::Plus) {
    if (!u.covers(1) || !u.covers(F + 1))
      throw Error(ErrorKind::RangeError, "trace must cover [1, floor(L)+1]");
    for (std::int64_t n = 1; n <= F; ++n) acc = log_add(acc, 2.0 * u.log_abs(n));
    if (frac > 0) acc = log_add(acc, std::log(frac) + 2.0 * u.log_abs(F + 1));
  } else {
    if (!u.covers(0) || !u.covers(-F - 1))
      throw Error(ErrorKind::RangeError, "trace must cover [-floor(L)-1, 0]");
    for (std::int64_t n = 0; n <= F; ++n) acc = log_add(acc, 2.0 * u.log_abs(-n));
    if (frac > 0) acc = log_add(acc, std::log(frac) + 2.0 * u.log_abs(-F - 1));
  }
  return 0.5 * acc;
}

double truncated_norm(const SolutionTrace& u, double L, Side sign) {
  return std::exp(log_truncated_norm(u, L, sign));
}

}  // namespace qpspec::dynamics
