#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qpspec/arithmetic.hpp"
#include "qpspec/model.hpp"
#include "qpspec/solution.hpp"

namespace qpspec::dynamics {

using Mat2 = std::array<std::array<double, 2>, 2>;

enum class Side { Plus, Minus };

std::string_view to_string(Side s);

/// T_n(E) = [[E - V(n), -1], [1, 0]].
Mat2 transfer_matrix(const model::OperatorPoint& op, double E, std::int64_t n);

/// Phi_n = exp(log_scale) * m.
struct CocycleProduct {
  Mat2 m{{{1.0, 0.0}, {0.0, 1.0}}};
  double log_scale = 0.0;
};

/// Phi_n = T_n ... T_1 for n >= 1, Phi_0 = Id and
/// Phi_n = T_{n+1}^{-1} ... T_0^{-1} for n <= -1. The running product is
/// rescaled whenever its entries leave [e^-30, e^30].
CocycleProduct cocycle_product(const model::OperatorPoint& op, double E, std::int64_t n);

struct CocycleNorm {
  // most expanded unit input direction of Phi_n
  std::array<double, 2> direction{1.0, 0.0};
  double log_norm = 0.0;
};

/// log ||Phi_n|| and the most expanded input direction.
CocycleNorm cocycle_lognorm(const model::OperatorPoint& op, double E, std::int64_t n);

/// Largest singular value of a 2x2 matrix.
double operator_norm(const Mat2& m);

struct LyapunovResult {
  double energy = 0.0;
  double L_hat = 0.0;
  double stderr_ = 0.0;
  std::int64_t n = 0;
  std::size_t phases = 0;
  std::size_t skipped = 0;
};

/// Phase average of (1/n) log ||Phi_n(x_j, E)|| with x_j = x_0 + j/phase_count,
/// x_0 drawn from `seed` in [0, 1/phase_count). The phase of `base` is ignored.
LyapunovResult lyapunov(const model::OperatorPoint& base, double E, std::int64_t n,
                        std::size_t phase_count, std::uint64_t seed = 0);
LyapunovResult lyapunov(const model::PotentialSpec& spec, const arithmetic::CFExpansion& alpha,
                        double E, std::int64_t n, std::size_t phase_count,
                        std::uint64_t seed = 0);
/// Single-threaded reference; bitwise equal to lyapunov().
LyapunovResult lyapunov_serial(const model::OperatorPoint& base, double E, std::int64_t n,
                               std::size_t phase_count, std::uint64_t seed = 0);

/// Lyapunov exponents over an energy grid, parallel over energies.
std::vector<LyapunovResult> lyapunov_sweep(const model::OperatorPoint& base,
                                           std::span<const double> energies, std::int64_t n,
                                           std::size_t phase_count, std::uint64_t seed = 0);
std::vector<LyapunovResult> lyapunov_sweep_serial(const model::OperatorPoint& base,
                                                  std::span<const double> energies,
                                                  std::int64_t n, std::size_t phase_count,
                                                  std::uint64_t seed = 0);

/// u_theta on [n_lo, n_hi] (must contain 0 and 1).
SolutionTrace solve_theta(const model::OperatorPoint& op, double E, double theta,
                          std::int64_t n_lo, std::int64_t n_hi);

/// Solution with prescribed (u(anchor), u(anchor+1)) = pair on [n_lo, n_hi].
SolutionTrace solve_from(const model::OperatorPoint& op, double E, std::int64_t anchor,
                         std::array<double, 2> pair, std::int64_t n_lo, std::int64_t n_hi);

/// |W(n) - W(0)| / max(1, |u(n)v(n+1)| + |u(n+1)v(n)|) with
/// W(n) = u(n)v(n+1) - u(n+1)v(n). v must carry angle theta_u + pi/2 mod pi,
/// so W(0) = +1, or -1 when the angle wrapped past pi.
double wronskian_residual(const SolutionTrace& u, const SolutionTrace& v, std::int64_t n);

/// ||u||_L^+ (sites 1..floor L, fractional weight on floor L + 1) or
/// ||u||_L^- (sites 0..-floor L, fractional weight on -floor L - 1).
double truncated_norm(const SolutionTrace& u, double L, Side sign);
double log_truncated_norm(const SolutionTrace& u, double L, Side sign);

/// Quadratic form theta -> (||u_theta||_L)^2 in the basis v (v(0), v(1)) = (1, 0),
/// w (w(0), w(1)) = (0, 1). gram = exp(gram_log_scale) * gram_scaled with
/// entries ordered (v, w).
struct GramPair {
  double L = 0.0;
  Side sign = Side::Plus;
  std::array<std::array<double, 2>, 2> gram_scaled{};
  double gram_log_scale = 0.0;
  double log_det = 0.0;
  double log_eig_min = 0.0;
  double log_eig_max = 0.0;
  // angles attaining max / min of ||u_theta||_L
  double theta_max = 0.0;
  double theta_min = 0.0;

  double eig_min() const;
  double eig_max() const;
  double det() const;
  double log_omega() const { return 0.5 * log_det; }
  double omega() const;
  /// Gram entries without scaling (may overflow for large L).
  std::array<std::array<double, 2>, 2> gram() const;
};

/// Gram data for every L in [0, L_max] from a single pair of solutions chosen
/// so that the determinant is computed without cancellation.
class OmegaProfile {
 public:
  OmegaProfile(const model::OperatorPoint& op, double E, Side sign, double L_max);

  double L_max() const { return L_max_; }
  Side sign() const { return sign_; }
  GramPair at(double L) const;
  double log_omega(double L) const;

 private:
  struct Sums {
    double log_gg, log_dd, rho;
  };
  Sums sums(double L) const;

  Side sign_;
  double L_max_;
  std::int64_t K_;
  // per-site data in window order (outward from the fixed end)
  std::vector<double> log_g2_, log_d2_, gd_scaled_;
  // cumulative sums over the first m window sites
  std::vector<double> cum_log_gg_, cum_log_dd_, cum_gd_;
  double gd_shift_ = 0.0;
  // boundary coordinates of g and d: (s(0), s(1)) scaled by exp(-log_norm)
  std::array<double, 2> g01_{}, d01_{};
  double log_g01_ = 0.0, log_d01_ = 0.0;
  double log_abs_w_ = 0.0;
};

GramPair gram_extremes(const model::OperatorPoint& op, double E, double L, Side sign);

/// L with omega(L) = 1/eps to 1e-6 relative.
double length_scale(const model::OperatorPoint& op, double E, double eps, Side sign);

/// theta + pi/2 reduced to [0, pi).
double complementary_angle(double theta);

}  // namespace qpspec::dynamics
