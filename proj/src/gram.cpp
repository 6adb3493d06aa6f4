#include <algorithm>
#include <cmath>
#include <numbers>

#include "qpspec/dynamics.hpp"
#include "qpspec/error.hpp"

namespace qpspec::dynamics {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// (s(i), s(i+1)) normalized, with the log of the removed norm.
std::array<double, 2> unit_pair(const SolutionTrace& s, std::int64_t i, double& log_norm) {
  const double shift = std::max(s.log_abs(i), s.log_abs(i + 1));
  const double a = s.scaled(i, shift), b = s.scaled(i + 1, shift);
  const double norm = std::hypot(a, b);
  log_norm = shift + std::log(norm);
  return {a / norm, b / norm};
}

}  // namespace

double GramPair::eig_min() const { return std::exp(log_eig_min); }
double GramPair::eig_max() const { return std::exp(log_eig_max); }
double GramPair::det() const { return std::exp(log_det); }
double GramPair::omega() const { return std::exp(0.5 * log_det); }

std::array<std::array<double, 2>, 2> GramPair::gram() const {
  const double s = std::exp(gram_log_scale);
  return {{{gram_scaled[0][0] * s, gram_scaled[0][1] * s},
           {gram_scaled[1][0] * s, gram_scaled[1][1] * s}}};
}

OmegaProfile::OmegaProfile(const model::OperatorPoint& op, double E, Side sign, double L_max)
    : sign_(sign), L_max_(L_max) {
  if (!(L_max >= 0.0) || !std::isfinite(L_max))
    throw Error(ErrorKind::RangeError, "L must be finite and >= 0");
  const auto F = static_cast<std::int64_t>(std::floor(L_max));
  std::int64_t lo, hi;
  std::vector<std::int64_t> sites;
  if (sign == Side::Plus) {
    lo = 0;
    hi = F + 1;
    for (std::int64_t n = 1; n <= F + 1; ++n) sites.push_back(n);
  } else {
    lo = -F - 1;
    hi = 1;
    for (std::int64_t n = 0; n >= -F - 1; --n) sites.push_back(n);
  }
  K_ = static_cast<std::int64_t>(sites.size());

  // d grows toward the left end, g toward the right end; each starts
  // perpendicular to the other so the pair stays well separated.
  double ln = 0.0;
  auto d = solve_from(op, E, hi - 1, {std::cos(1.0), std::sin(1.0)}, lo, hi);
  auto dl = unit_pair(d, lo, ln);
  auto g = solve_from(op, E, lo, {-dl[1], dl[0]}, lo, hi);
  double log_g_right = 0.0;
  auto gr = unit_pair(g, hi - 1, log_g_right);
  d = solve_from(op, E, hi - 1, {-gr[1], gr[0]}, lo, hi);
  // W(g, d) at the right anchor: |g pair| * |d pair| * sin(90 deg)
  log_abs_w_ = log_g_right;

  g01_ = unit_pair(g, 0, log_g01_);
  d01_ = unit_pair(d, 0, log_d01_);

  log_g2_.resize(sites.size());
  log_d2_.resize(sites.size());
  gd_scaled_.resize(sites.size());
  gd_shift_ = kNegInf;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    log_g2_[i] = 2.0 * g.log_abs(sites[i]);
    log_d2_[i] = 2.0 * d.log_abs(sites[i]);
    gd_shift_ = std::max(gd_shift_, 0.5 * (log_g2_[i] + log_d2_[i]));
  }
  if (!std::isfinite(gd_shift_)) gd_shift_ = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i)
    gd_scaled_[i] = g.scaled(sites[i], 0.0) == 0.0 || d.scaled(sites[i], 0.0) == 0.0
                        ? 0.0
                        : std::copysign(1.0, g.mantissa[g.index(sites[i])]) *
                              std::copysign(1.0, d.mantissa[d.index(sites[i])]) *
                              std::exp(0.5 * (log_g2_[i] + log_d2_[i]) - gd_shift_);

  cum_log_gg_.assign(sites.size() + 1, kNegInf);
  cum_log_dd_.assign(sites.size() + 1, kNegInf);
  cum_gd_.assign(sites.size() + 1, 0.0);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    cum_log_gg_[i + 1] = log_add(cum_log_gg_[i], log_g2_[i]);
    cum_log_dd_[i + 1] = log_add(cum_log_dd_[i], log_d2_[i]);
    cum_gd_[i + 1] = cum_gd_[i] + gd_scaled_[i];
  }
}

OmegaProfile::Sums OmegaProfile::sums(double L) const {
  if (!(L >= 0.0) || L > L_max_ * (1.0 + 1e-15) + 1e-300)
    throw Error(ErrorKind::RangeError, "L outside the profile range");
  L = std::min(L, L_max_);
  const auto F = static_cast<std::size_t>(std::floor(L));
  const double frac = L - static_cast<double>(F);
  const std::size_t full = sign_ == Side::Plus ? F : F + 1;
  Sums s{cum_log_gg_[full], cum_log_dd_[full], cum_gd_[full]};
  if (frac > 0.0 && full < log_g2_.size()) {
    const double lf = std::log(frac);
    s.log_gg = log_add(s.log_gg, lf + log_g2_[full]);
    s.log_dd = log_add(s.log_dd, lf + log_d2_[full]);
    s.rho += frac * gd_scaled_[full];
  }
  if (s.log_gg == kNegInf || s.log_dd == kNegInf)
    s.rho = 0.0;
  else
    s.rho *= std::exp(gd_shift_ - 0.5 * s.log_gg - 0.5 * s.log_dd);
  return s;
}

double OmegaProfile::log_omega(double L) const {
  // one weighted site: the Gram matrix has rank one
  if (sign_ == Side::Plus ? L <= 1.0 : L <= 0.0) return kNegInf;
  const Sums s = sums(L);
  const double one_minus = (1.0 - s.rho) * (1.0 + s.rho);
  if (!(one_minus > 0.0) || s.log_gg == kNegInf || s.log_dd == kNegInf) return kNegInf;
  return 0.5 * (s.log_gg + s.log_dd + std::log(one_minus) - 2.0 * log_abs_w_);
}

GramPair OmegaProfile::at(double L) const {
  const Sums s = sums(L);
  GramPair out;
  out.L = L;
  out.sign = sign_;
  out.log_det = 2.0 * log_omega(L);

  // G_vw = A^{-1} G_gd A^{-T}, A rows = unit boundary coordinates of g, d
  const double lgg = s.log_gg == kNegInf ? kNegInf : s.log_gg - 2.0 * log_g01_;
  const double ldd = s.log_dd == kNegInf ? kNegInf : s.log_dd - 2.0 * log_d01_;
  const double S = std::max(lgg, ldd);
  if (S == kNegInf) {
    out.gram_log_scale = 0.0;
    out.log_eig_max = out.log_eig_min = out.log_det = kNegInf;
    return out;
  }
  const double p00 = std::exp(lgg - S), p11 = std::exp(ldd - S);
  const double p01 = s.rho * std::sqrt(p00 * p11);
  const double w = g01_[0] * d01_[1] - g01_[1] * d01_[0];
  const double inv[2][2] = {{d01_[1] / w, -g01_[1] / w}, {-d01_[0] / w, g01_[0] / w}};
  const double P[2][2] = {{p00, p01}, {p01, p11}};
  double tmp[2][2] = {};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k < 2; ++k) tmp[i][j] += inv[i][k] * P[k][j];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      double v = 0.0;
      for (int k = 0; k < 2; ++k) v += tmp[i][k] * inv[j][k];
      out.gram_scaled[i][j] = v;
    }
  out.gram_scaled[1][0] = out.gram_scaled[0][1];
  out.gram_log_scale = S;

  const double a = out.gram_scaled[0][0], b = out.gram_scaled[0][1], c = out.gram_scaled[1][1];
  const double lmax = 0.5 * (a + c) + std::hypot(0.5 * (a - c), b);
  out.log_eig_max = std::log(lmax) + S;
  out.log_eig_min = out.log_det == kNegInf ? kNegInf : out.log_det - out.log_eig_max;

  // top eigenvector in (v, w) coordinates = (u(0), u(1)) = (-sin t, cos t)
  std::array<double, 2> e1{b, lmax - a}, e2{lmax - c, b};
  auto e = std::hypot(e1[0], e1[1]) >= std::hypot(e2[0], e2[1]) ? e1 : e2;
  if (e[0] == 0.0 && e[1] == 0.0) e = a >= c ? std::array<double, 2>{1.0, 0.0}
                                             : std::array<double, 2>{0.0, 1.0};
  double theta = std::atan2(-e[0], e[1]);
  theta = std::fmod(theta, std::numbers::pi);
  if (theta < 0) theta += std::numbers::pi;
  out.theta_max = theta;
  out.theta_min = complementary_angle(theta);
  return out;
}

GramPair gram_extremes(const model::OperatorPoint& op, double E, double L, Side sign) {
  return OmegaProfile(op, E, sign, L).at(L);
}

double length_scale(const model::OperatorPoint& op, double E, double eps, Side sign) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
  const double target = -std::log(eps);
  {
    OmegaProfile p(op, E, sign, 1.0);
    if (p.log_omega(1.0) >= target)
      throw Error(ErrorKind::DegenerateScale, "omega(1) already exceeds 1/eps");
  }
  double hi = 2.0;
  while (true) {
    OmegaProfile p(op, E, sign, hi);
    if (p.log_omega(hi) >= target) {
      double lo = hi / 2.0;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double v = p.log_omega(mid);
        if (std::fabs(v - target) < 1e-6) return mid;
        if (v < target)
          lo = mid;
        else
          hi = mid;
        if (hi - lo <= 1e-13 * hi) break;
      }
      return 0.5 * (lo + hi);
    }
    hi *= 2.0;
    if (hi > 67108864.0)
      throw Error(ErrorKind::NoConvergence, "omega(L) does not reach 1/eps below L = 2^26");
  }
}

}  // namespace qpspec::dynamics
