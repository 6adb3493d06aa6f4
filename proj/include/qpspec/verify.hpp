#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpspec/arithmetic.hpp"
#include "qpspec/model.hpp"
#include "qpspec/report.hpp"
#include "qpspec/spectral.hpp"

namespace qpspec::verify {

struct TransitionParams {
  double t1 = 0.0;
  double t2 = 0.0;
  double sigma = 0.01;
  double C = 0.0;
};

/// t1 = (beta - Lambda)/beta + sigma with Lambda = min(L, beta); t2 defaults to
/// t_lo + 0.9 (1 - t_lo), t_lo = (9 beta - Lambda) / (9 beta); C = 4/(t2 - t1).
TransitionParams transition_params(double L, double beta, double sigma = 0.01,
                                   std::optional<double> t2 = std::nullopt);

nlohmann::json to_json(const TransitionParams& p);

/// Operator, frequency and the estimators the checks share.
struct Context {
  Context(model::PotentialSpec spec, arithmetic::CFExpansion cf, double x);

  model::OperatorPoint op;
  arithmetic::CFExpansion cf;
  std::int64_t lyapunov_n = 10000;
  std::size_t lyapunov_phases = 32;
  std::uint64_t seed = 0;
  // Lyapunov estimates at or below this are treated as 0
  double lyapunov_floor = 0.01;
  std::optional<double> beta_override;

  /// Phase-averaged Lyapunov estimate at E, 0 when not resolved above the floor.
  double lyapunov(double E) const;
  double beta() const;
  /// ln q_{n+1} from the stored beta sequence (q_{n+1} may not fit in 64 bits).
  double log_q_next(std::size_t n) const;
};

/// NaN selects the default slack 0.3 L(E).
inline constexpr double kDefaultDelta = std::numeric_limits<double>::quiet_NaN();
/// Sample cap for point scans.
inline constexpr std::size_t kSampleCap = 200;

VerificationReport check_diophantine_regularity(const Context& ctx, double E, std::size_t n,
                                                double delta = kDefaultDelta, double C = 4.0);

VerificationReport check_nonresonant_regularity(const Context& ctx, double E, std::size_t n,
                                                double tau = 0.1, double delta = kDefaultDelta,
                                                double C = 4.0);

/// Half-width M of the block [-M, M] used by check_resonant_decay.
std::int64_t resonant_block_half_width(const Context& ctx, std::size_t n,
                                       const TransitionParams& params);
/// Eigenvalue of that block closest to E.
double nearest_block_eigenvalue(const Context& ctx, std::size_t n,
                                const TransitionParams& params, double E);

VerificationReport check_resonant_decay(const Context& ctx, double E_near, std::size_t n,
                                        const TransitionParams& params,
                                        double delta = kDefaultDelta, double tau = 0.1,
                                        double energy_tol = 1e-8);

VerificationReport check_omega_growth(const Context& ctx, double E,
                                      std::span<const double> L_grid,
                                      const TransitionParams& params, double eps_slack);

/// d = exp(-(beta + delta) q_n + log |j|).
double block_decay_d(double beta, double delta, std::int64_t q_n, std::int64_t j);

VerificationReport check_block_decay(const Context& ctx, double E, std::size_t n, std::int64_t j,
                                     double delta = kDefaultDelta);

VerificationReport check_m_lower_bound(const Context& ctx, double E, double t,
                                       std::span<const double> eps_grid);

/// Decreasing grid from hi down to 10x the atom spacing near E.
std::vector<double> resolved_grid(const spectral::AtomicMeasure& mu, double E, double hi,
                                  std::size_t count);

struct ScanConfig {
  std::int64_t N = 4000;
  std::int64_t bc_average = 4;
  double eps_hi = 0.1;
  std::size_t eps_count = 10;
  double eta_offset = 0.2;
};

struct ScanRow {
  double E = 0.0;
  double L_hat = 0.0;
  double beta_hat = 0.0;
  double Lambda = 0.0;
  double packing_bound = 0.0;
  double renyi_bound = 0.0;
  double atom_E = 0.0;
  double atom_w = 0.0;
  double gamma_minus = std::numeric_limits<double>::quiet_NaN();
  double gamma_plus = std::numeric_limits<double>::quiet_NaN();
  double eta_lo = 0.0;
  double eta_hi = 0.0;
  std::string trend_lo;
  std::string trend_hi;
  std::string error;
};

/// One row per energy; each row's failure is recorded in `error`.
std::vector<ScanRow> transition_scan(const Context& ctx, std::span<const double> E_grid,
                                     const ScanConfig& config);
/// Same rows on a measure computed elsewhere.
std::vector<ScanRow> transition_scan(const Context& ctx, const spectral::AtomicMeasure& mu,
                                     std::span<const double> E_grid, const ScanConfig& config);

void write_csv(std::ostream& out, std::span<const ScanRow> rows);

/// Median of gamma+ over mu-quantile energies whose Lyapunov estimate lies in
/// [L_lo, L_hi]; pass below `threshold`.
VerificationReport check_atomic_regime(const Context& ctx, const spectral::AtomicMeasure& mu,
                                       double L_lo, double L_hi, double threshold = 0.15,
                                       std::size_t samples = 60, const ScanConfig& config = {});

/// Fraction of mu-quantile energies with L_hat in (r_lo, r_hi) beta whose
/// lower eta-derivative diverges at eta = 2 (1 - L_hat/beta) + offset.
VerificationReport check_eta_divergence(const Context& ctx, const spectral::AtomicMeasure& mu,
                                        double r_lo = 0.55, double r_hi = 0.9,
                                        double fraction = 0.8, std::size_t samples = 60,
                                        const ScanConfig& config = {});

}  // namespace qpspec::verify
