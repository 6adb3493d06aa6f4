#include "qpspec/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "qpspec/dimension.hpp"
#include "qpspec/dynamics.hpp"
#include "qpspec/error.hpp"

namespace qpspec::verify {

using arithmetic::CFExpansion;
using dynamics::Side;
using json = nlohmann::json;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kInf = std::numeric_limits<double>::infinity();

double resolve_delta(double delta, double L) {
  if (std::isnan(delta)) return 0.3 * L;
  if (delta < 0.0) throw Error(ErrorKind::InvalidArgument, "slack delta must be nonnegative");
  return delta;
}

// `cap` indices spread evenly over 0..total-1 (all of them when total <= cap)
// Decay e^{-t l} over the tested distance l must amount to at least a factor e.
bool unresolved_decay(double t, double l) { return t * l < 1.0; }

const char* kUnresolved = "decay rate not resolved over the tested distance (t l < 1)";

std::vector<std::size_t> stratified(std::size_t total, std::size_t cap) {
  std::vector<std::size_t> idx;
  if (total <= cap) {
    idx.resize(total);
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  for (std::size_t i = 0; i < cap; ++i)
    idx.push_back(static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                           static_cast<double>(total) / static_cast<double>(cap)));
  return idx;
}

VerificationReport start(const char* name, json params) {
  VerificationReport r;
  r.check_name = name;
  r.parameters = std::move(params);
  return r;
}

std::int64_t q_at(const CFExpansion& cf, std::size_t n) {
  if (n > cf.depth()) throw Error(ErrorKind::DepthError, "index beyond stored convergents");
  return cf.q_small(n);
}

// log |det (T - E)| of the leading i x i minors (i = 0..n) when forward,
// of the trailing minors starting at row i (i = 0..n, row n empty) otherwise
std::vector<double> log_minors(const Tridiag& t, double E, bool forward) {
  const std::size_t n = t.size();
  std::vector<double> out(n + 1, 0.0);
  double prev = 0.0, cur = 1.0, scale = 0.0;  // det of one smaller minor and current
  for (std::size_t step = 1; step <= n; ++step) {
    const std::size_t row = forward ? step - 1 : n - step;
    const double next = (t.diag[row] - E) * cur - prev;
    prev = cur;
    cur = next;
    const double m = std::max(std::fabs(prev), std::fabs(cur));
    if (m > 1e30 || (m < 1e-30 && m > 0.0)) {
      prev /= m;
      cur /= m;
      scale += std::log(m);
    }
    out[forward ? step : n - step] = std::log(std::fabs(cur)) + scale;
  }
  return out;
}

std::vector<double> inverse_iteration(const Tridiag& t, double lambda) {
  const std::size_t n = t.size();
  double shift = lambda;
  TridiagLU lu(t, shift);
  if (lu.singular()) {
    shift = lambda + 1e-14 * std::max(1.0, t.radius_bound());
    lu = TridiagLU(t, shift);
  }
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.25 * std::sin(static_cast<double>(i) + 0.5);
  for (int it = 0; it < 3; ++it) {
    lu.solve(v);
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    for (double& x : v) x /= m;
  }
  return v;
}

double slope_fit(std::span<const double> x, std::span<const double> y) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace

TransitionParams transition_params(double L, double beta, double sigma, std::optional<double> t2) {
  if (!(beta > 0.0)) throw Error(ErrorKind::BetaZero, "transition parameters need beta > 0");
  if (!(sigma > 0.0)) throw Error(ErrorKind::InvalidArgument, "sigma must be positive");
  const double lam = std::clamp(L, 0.0, beta);
  TransitionParams p;
  p.sigma = sigma;
  p.t1 = (beta - lam) / beta + sigma;
  const double t_lo = (9.0 * beta - lam) / (9.0 * beta);
  p.t2 = t2 ? *t2 : t_lo + 0.9 * (1.0 - t_lo);
  if (!(p.t1 < p.t2 && p.t2 < 1.0))
    throw Error(ErrorKind::InvalidArgument, "need t1 < t2 < 1 (t1=" + std::to_string(p.t1) +
                                                ", t2=" + std::to_string(p.t2) + ")");
  p.C = 4.0 / (p.t2 - p.t1);
  return p;
}

json to_json(const TransitionParams& p) {
  return {{"t1", p.t1}, {"t2", p.t2}, {"sigma", p.sigma}, {"C", p.C}};
}

Context::Context(model::PotentialSpec spec, arithmetic::CFExpansion cf_, double x)
    : op(std::move(spec), cf_, x), cf(std::move(cf_)) {}

double Context::lyapunov(double E) const {
  const auto r = dynamics::lyapunov(op, E, lyapunov_n, lyapunov_phases, seed);
  return r.L_hat > lyapunov_floor ? r.L_hat : 0.0;
}

double Context::beta() const {
  if (beta_override) return *beta_override;
  return arithmetic::beta_estimate(cf).beta_hat;
}

double Context::log_q_next(std::size_t n) const {
  if (n >= cf.beta_sequence.size())
    throw Error(ErrorKind::DepthError, "q_{n+1} not stored");
  return cf.beta_sequence[n] * static_cast<double>(q_at(cf, n));
}

VerificationReport check_diophantine_regularity(const Context& ctx, double E, std::size_t n,
                                                double delta, double C) {
  json P{{"E", E}, {"n", n}, {"C", C}};
  const std::int64_t q = q_at(ctx.cf, n);
  const double lq1 = ctx.log_q_next(n);
  P["q_n"] = q;
  if (lq1 > C * std::log(static_cast<double>(q)))
    return VerificationReport::skipped("diophantine_regularity", P, "q_{n+1} > q_n^C");
  const double L = ctx.lyapunov(E);
  delta = resolve_delta(delta, L);
  const double t = L - delta;
  P["L"] = L;
  P["delta"] = delta;
  if (!(t > 0.0))
    return VerificationReport::skipped("diophantine_regularity", P,
                                       "L(E) - delta <= 0: no decay rate to test");
  if (unresolved_decay(t, static_cast<double>((q - 1) / 2)))
    return VerificationReport::skipped("diophantine_regularity", P, kUnresolved);
  const std::int64_t q1 = q_at(ctx.cf, n + 1);
  const std::int64_t a = q / 2 + 1, b = q1 - q / 2 - 1;
  if (b < a)
    return VerificationReport::skipped("diophantine_regularity", P, "empty sampling range");
  const auto half = static_cast<std::size_t>(b - a + 1);
  const auto picks = stratified(2 * half, kSampleCap);
  std::size_t regular = 0, near_singular = 0;
  double worst = kInf;
  for (std::size_t i : picks) {
    const std::int64_t m = i < half ? -(b - static_cast<std::int64_t>(i))
                                    : a + static_cast<std::int64_t>(i - half);
    const auto r = model::regular_check(ctx.op, E, m, t, q, {m - q + 1, m + q - 1});
    near_singular += r.near_singular_skipped;
    if (r.interval) ++regular;
    worst = std::min(worst, r.best_margin);
  }
  auto rep = start("diophantine_regularity", P);
  const double frac = static_cast<double>(regular) / static_cast<double>(picks.size());
  rep.samples = picks.size();
  rep.conclude(frac - 0.9);
  rep.notes = "regular fraction " + std::to_string(frac) + ", worst point margin " +
              std::to_string(worst) + ", near-singular intervals " +
              std::to_string(near_singular);
  return rep;
}

VerificationReport check_nonresonant_regularity(const Context& ctx, double E, std::size_t n,
                                                double tau, double delta, double C) {
  json P{{"E", E}, {"n", n}, {"tau", tau}, {"C", C}};
  const std::int64_t q = q_at(ctx.cf, n);
  const double lq1 = ctx.log_q_next(n);
  P["q_n"] = q;
  if (!(lq1 > C * std::log(static_cast<double>(q))))
    return VerificationReport::skipped("nonresonant_regularity", P, "q_{n+1} <= q_n^C");
  const auto rs = arithmetic::resonance_scales(ctx.cf, n, tau);
  const double q0 = static_cast<double>(rs.q_n_minus_n0);
  const bool prime_branch = std::log(static_cast<double>(rs.s)) >= C * std::log(q0);
  const std::int64_t factor = prime_branch ? rs.s_prime : rs.s;
  if (factor < 1) throw Error(ErrorKind::DegenerateS, "s' = 0 leaves no regularity window");
  const std::int64_t k = 2 * factor * rs.q_n_minus_n0 - 1;
  P["k"] = k;
  P["s"] = rs.s;
  P["s_prime_branch"] = prime_branch;
  const double L = ctx.lyapunov(E);
  delta = resolve_delta(delta, L);
  const double t = L - delta;
  P["L"] = L;
  P["delta"] = delta;
  if (!(t > 0.0))
    return VerificationReport::skipped("nonresonant_regularity", P,
                                       "L(E) - delta <= 0: no decay rate to test");
  if (unresolved_decay(t, static_cast<double>((k - 1) / 2)))
    return VerificationReport::skipped("nonresonant_regularity", P, kUnresolved);
  constexpr std::int64_t kRangeCap = std::int64_t{1} << 40;
  const std::int64_t R = lq1 < std::log(static_cast<double>(kRangeCap)) ? q_at(ctx.cf, n + 1)
                                                                         : kRangeCap;
  P["range"] = R;
  std::vector<std::int64_t> points;
  for (std::size_t i = 0; i < kSampleCap; ++i) {
    std::int64_t m = -R + static_cast<std::int64_t>((static_cast<double>(i) + 0.5) *
                                                    static_cast<double>(2 * R + 1) /
                                                    static_cast<double>(kSampleCap));
    while (m <= R &&
           std::holds_alternative<arithmetic::Resonant>(
               arithmetic::classify_resonant(m, rs.q_n, rs.b_n, R)))
      ++m;
    if (m <= R && (points.empty() || m > points.back())) points.push_back(m);
  }
  std::size_t regular = 0, near_singular = 0;
  double worst = kInf;
  for (std::int64_t m : points) {
    const auto r = model::regular_check(ctx.op, E, m, t, k, {m - k + 1, m + k - 1});
    near_singular += r.near_singular_skipped;
    if (r.interval) ++regular;
    worst = std::min(worst, r.best_margin);
  }
  auto rep = start("nonresonant_regularity", P);
  const double frac = static_cast<double>(regular) / static_cast<double>(points.size());
  rep.samples = points.size();
  rep.conclude(frac - 0.9);
  rep.notes = "regular fraction " + std::to_string(frac) + ", worst point margin " +
              std::to_string(worst) + ", near-singular intervals " +
              std::to_string(near_singular);
  return rep;
}

std::int64_t resonant_block_half_width(const Context& ctx, std::size_t n,
                                       const TransitionParams& params) {
  const double log_hi = params.t2 * ctx.log_q_next(n);
  constexpr std::int64_t kCap = 49999;
  if (log_hi >= std::log(static_cast<double>(kCap))) return kCap;
  return std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(std::exp(log_hi))));
}

double nearest_block_eigenvalue(const Context& ctx, std::size_t n,
                                const TransitionParams& params, double E) {
  const std::int64_t M = resonant_block_half_width(ctx, n, params);
  const auto T = model::block_matrix(ctx.op, -M, M);
  const std::size_t below = sturm_count(T, E);
  double best = kInf, value = E;
  for (std::size_t idx : {below - 1, below}) {
    if (idx >= T.size()) continue;  // wraps for below == 0
    const double ev = eigenvalue_by_index(T, idx);
    if (std::fabs(ev - E) < best) {
      best = std::fabs(ev - E);
      value = ev;
    }
  }
  return value;
}

VerificationReport check_resonant_decay(const Context& ctx, double E_near, std::size_t n,
                                        const TransitionParams& params, double delta, double tau,
                                        double energy_tol) {
  json P{{"E_near", E_near}, {"n", n}, {"tau", tau}, {"params", to_json(params)}};
  const double L = ctx.lyapunov(E_near);
  const double beta = ctx.beta();
  delta = resolve_delta(delta, L);
  P["L"] = L;
  P["beta"] = beta;
  P["delta"] = delta;
  const double rate = L - (1.0 - params.t1) * beta - delta;
  if (!(rate > 0.0))
    return VerificationReport::skipped("resonant_decay", P,
                                       "L - (1 - t1) beta - delta <= 0: bound is vacuous");
  const std::int64_t q = q_at(ctx.cf, n);
  const double lq1 = ctx.log_q_next(n);
  const double log_lo = std::log(2.0) + 2.0 * std::log(static_cast<double>(q)) + params.t1 * lq1;
  const double log_hi = params.t2 * lq1;
  if (log_lo >= log_hi)
    return VerificationReport::skipped("resonant_decay", P,
                                       "Case-1 arithmetic: 2 q_n^2 q_{n+1}^t1 >= q_{n+1}^t2");
  const std::int64_t M = resonant_block_half_width(ctx, n, params);
  const double k_lo = std::exp(log_lo), k_hi = std::exp(log_hi);
  const auto first = static_cast<std::int64_t>(std::floor(k_lo)) + 1;
  const std::int64_t last = std::min<std::int64_t>(
      M, static_cast<std::int64_t>(std::min(std::ceil(k_hi) - 1.0, 9e18)));
  P["block_half_width"] = M;
  if (first > last)
    return VerificationReport::skipped("resonant_decay", P,
                                       "resonant window lies outside the block");

  const auto T = model::block_matrix(ctx.op, -M, M);
  const double lambda = nearest_block_eigenvalue(ctx, n, params, E_near);
  P["eigenvalue"] = lambda;
  if (std::fabs(lambda - E_near) > energy_tol)
    throw Error(ErrorKind::NoEigenvectorNearE,
                "nearest block eigenvalue " + std::to_string(lambda) + " is " +
                    std::to_string(std::fabs(lambda - E_near)) + " from E");
  const auto phi = inverse_iteration(T, lambda);
  const auto at = [&](std::int64_t k) { return phi[static_cast<std::size_t>(k + M)]; };
  const double norm = std::hypot(at(0), at(1));
  if (!(norm > 0.0))
    throw Error(ErrorKind::NoEigenvectorNearE, "eigenvector vanishes at sites 0 and 1");
  const auto b_n = static_cast<std::int64_t>(std::floor(tau * static_cast<double>(q)));
  double worst = kInf;
  std::size_t count = 0;
  for (std::int64_t a = first; a <= last; ++a) {
    if (!std::holds_alternative<arithmetic::Resonant>(
            arithmetic::classify_resonant(a, q, b_n, M)))
      continue;
    for (std::int64_t k : {a, -a}) {
      const double v = std::fabs(at(k)) / norm;
      const double log_v = v > 0.0 ? std::log(v) : kNegInf;
      worst = std::min(worst, -0.5 * rate * static_cast<double>(a) - log_v);
      ++count;
    }
  }
  if (count == 0)
    return VerificationReport::skipped("resonant_decay", P, "no resonant sites in the window");
  auto rep = start("resonant_decay", P);
  rep.samples = count;
  rep.conclude(worst);
  rep.notes = "resonant sites in (" + std::to_string(k_lo) + ", " +
              std::to_string(std::min(k_hi, static_cast<double>(M))) + ")";
  return rep;
}

VerificationReport check_omega_growth(const Context& ctx, double E,
                                      std::span<const double> L_grid,
                                      const TransitionParams& params, double eps_slack) {
  json P{{"E", E}, {"params", to_json(params)}, {"eps_slack", eps_slack}};
  if (L_grid.size() < 2) throw Error(ErrorKind::DegenerateScale, "L grid needs two points");
  for (std::size_t i = 0; i < L_grid.size(); ++i)
    if (!(L_grid[i] > 0.0) || (i > 0 && !(L_grid[i] > L_grid[i - 1])))
      throw Error(ErrorKind::DegenerateScale, "L grid must be positive and increasing");
  if (std::log10(L_grid.back() / L_grid.front()) < 1.5)
    throw Error(ErrorKind::DegenerateScale, "L grid spans less than 1.5 decades");
  const double beta = ctx.beta();
  P["beta"] = beta;
  if (!(beta > 0.0))
    return VerificationReport::skipped("omega_growth", P, "beta estimate is 0");
  const double L = ctx.lyapunov(E);
  const double required = 1.0 + 0.5 * L / (params.t1 * beta) - eps_slack;
  P["L"] = L;
  P["required_slope"] = required;
  double worst = kInf;
  std::string notes;
  for (Side s : {Side::Plus, Side::Minus}) {
    const dynamics::OmegaProfile prof(ctx.op, E, s, L_grid.back());
    std::vector<double> x, y;
    for (std::size_t i = L_grid.size() / 2; i < L_grid.size(); ++i) {
      const double lw = prof.log_omega(L_grid[i]);
      if (!std::isfinite(lw)) continue;
      x.push_back(std::log(L_grid[i]));
      y.push_back(lw);
    }
    if (x.size() < 2)
      throw Error(ErrorKind::DegenerateScale, "fewer than two usable points in the grid tail");
    const double slope = slope_fit(x, y);
    P[std::string("slope_") + std::string(dynamics::to_string(s))] = slope;
    worst = std::min(worst, slope - required);
  }
  auto rep = start("omega_growth", P);
  rep.samples = 2 * (L_grid.size() - L_grid.size() / 2);
  rep.conclude(worst);
  return rep;
}

double block_decay_d(double beta, double delta, std::int64_t q_n, std::int64_t j) {
  if (j == 0) throw Error(ErrorKind::InvalidArgument, "j must be nonzero");
  return std::exp(-(beta + delta) * static_cast<double>(q_n) +
                  std::log(std::fabs(static_cast<double>(j))));
}

VerificationReport check_block_decay(const Context& ctx, double E, std::size_t n, std::int64_t j,
                                     double delta) {
  if (j == 0) throw Error(ErrorKind::InvalidArgument, "j must be nonzero");
  json P{{"E", E}, {"n", n}, {"j", j}};
  const std::int64_t q = q_at(ctx.cf, n);
  P["q_n"] = q;
  if (q > 500) return VerificationReport::skipped("block_decay", P, "q_n above 500");
  const double L = ctx.lyapunov(E);
  const double beta = ctx.beta();
  delta = resolve_delta(delta, L);
  const double t = L - delta;
  P["L"] = L;
  P["beta"] = beta;
  P["delta"] = delta;
  if (!(t > 0.0))
    return VerificationReport::skipped("block_decay", P, "L(E) - delta <= 0: no decay rate to test");
  const double log_half_d = -(beta + delta) * static_cast<double>(q) +
                            std::log(std::fabs(static_cast<double>(j))) - std::log(2.0);
  P["log_d"] = log_half_d + std::log(2.0);
  const std::int64_t h = 3 * q / 2;
  const std::int64_t len = 2 * q - 2;
  std::vector<std::int64_t> cands;
  for (std::int64_t v = -h; v <= q - h - 1; ++v) cands.push_back(v);
  for (std::int64_t v = j * q - h; v <= (j + 1) * q - h - 1; ++v) cands.push_back(v);
  const double fifth = static_cast<double>(len) / 5.0;
  if (unresolved_decay(t, static_cast<double>(len) - fifth))
    return VerificationReport::skipped("block_decay", P, kUnresolved);

  // margin of the bound over the middle of J = [j0, j0 + len], from LU columns
  // or, for the confirmation pass, from ratios of principal minors
  auto margin_for = [&](std::int64_t j0, bool minors) {
    const std::int64_t n1 = j0, n2 = j0 + len;
    const auto s_lo = static_cast<std::int64_t>(std::ceil(static_cast<double>(j0) + fifth));
    const auto s_hi =
        static_cast<std::int64_t>(std::floor(static_cast<double>(j0 + len) - fifth));
    std::vector<double> g1, g2;  // log |G_J(s, n1)|, log |G_J(s, n2)| by offset
    const auto size = static_cast<std::size_t>(len + 1);
    if (!minors) {
      const model::GreenBlock g(ctx.op, n1, n2, E);
      const auto c1 = g.column(n1), c2 = g.column(n2);
      for (std::size_t i = 0; i < size; ++i) {
        g1.push_back(std::log(std::fabs(c1[i])));
        g2.push_back(std::log(std::fabs(c2[i])));
      }
    } else {
      const auto T = model::block_matrix(ctx.op, n1, n2);
      const auto fwd = log_minors(T, E, true), bwd = log_minors(T, E, false);
      // G(s, n1) = +-det[s+1..n2] / det J, G(s, n2) = +-det[n1..s-1] / det J
      for (std::size_t i = 0; i < size; ++i) {
        g1.push_back(bwd[i + 1] - fwd[size]);
        g2.push_back(fwd[i] - fwd[size]);
      }
    }
    double worst = kInf;
    for (std::int64_t s = s_lo; s <= s_hi; ++s) {
      const auto i = static_cast<std::size_t>(s - n1);
      worst = std::min(worst, -static_cast<double>(s - n1) * t - log_half_d - g1[i]);
      worst = std::min(worst, -static_cast<double>(n2 - s) * t - log_half_d - g2[i]);
    }
    return worst;
  };

  std::vector<std::pair<double, std::int64_t>> scored;
  std::size_t near_singular = 0;
  for (std::int64_t j0 : cands) {
    try {
      scored.emplace_back(margin_for(j0, false), j0);
    } catch (const NearSingularEnergyError&) {
      ++near_singular;
    }
  }
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  auto rep = start("block_decay", P);
  rep.samples = cands.size();
  if (scored.empty()) {
    rep.conclude(kNegInf);
    rep.notes = "search exhausted: every candidate block was near-singular";
    return rep;
  }
  std::size_t rejected = 0;
  double best = kNegInf;
  for (const auto& [m, j0] : scored) {
    if (m < 0.0) {
      best = std::max(best, m);
      break;
    }
    const double confirm = margin_for(j0, true);
    if (confirm >= 0.0) {
      rep.parameters["j0"] = j0;
      rep.conclude(std::min(m, confirm));
      rep.notes = "confirmed from principal minors; near-singular candidates " +
                  std::to_string(near_singular);
      return rep;
    }
    best = std::max(best, confirm);
    ++rejected;
  }
  rep.conclude(best);
  rep.parameters["best_j0"] = scored.front().second;
  rep.notes = "search exhausted; best margin " + std::to_string(best);
  if (rejected > 0) rep.notes += ", " + std::to_string(rejected) + " candidates failed confirmation";
  return rep;
}

VerificationReport check_m_lower_bound(const Context& ctx, double E, double t,
                                       std::span<const double> eps_grid) {
  json P{{"E", E}, {"t", t}};
  if (eps_grid.size() < 2) throw Error(ErrorKind::InvalidArgument, "eps grid needs two points");
  for (std::size_t i = 0; i < eps_grid.size(); ++i)
    if (!(eps_grid[i] > 0.0 && eps_grid[i] <= 1.0) || (i > 0 && !(eps_grid[i] < eps_grid[i - 1])))
      throw Error(ErrorKind::InvalidArgument, "eps grid must be decreasing in (0, 1]");
  const double L = ctx.lyapunov(E);
  const double beta = ctx.beta();
  P["L"] = L;
  P["beta"] = beta;
  double upper = 0.0;
  if (L > 0.0) upper = (beta > 0.0 && 2.0 * beta - L > 0.0) ? std::min(1.0, L / (2.0 * beta - L)) : 1.0;
  P["t_upper"] = upper;
  if (!(t == 0.0 || (t > 0.0 && t < upper)))
    return VerificationReport::skipped("m_lower_bound", P, "t outside the admissible range");
  double worst = kInf;
  bool decaying = false;
  std::size_t count = 0;
  for (Side s : {Side::Plus, Side::Minus}) {
    const double Ls = dynamics::length_scale(ctx.op, E, eps_grid.back(), s);
    const double theta = dynamics::gram_extremes(ctx.op, E, Ls, s).theta_min;
    P[std::string("theta_") + std::string(dynamics::to_string(s))] = theta;
    double prev = kNegInf;
    for (std::size_t i = eps_grid.size() / 2; i < eps_grid.size(); ++i) {
      const double e = eps_grid[i];
      const auto mv = spectral::half_line_m(ctx.op, {E, e}, theta, s);
      const double log_im = std::log(mv.value.imag());
      worst = std::min(worst, log_im + 0.9 * t * std::log(e));
      if (std::isfinite(prev) && log_im < prev) decaying = true;
      prev = log_im;
      ++count;
    }
  }
  auto rep = start("m_lower_bound", P);
  rep.samples = count;
  rep.conclude(worst);
  if (!rep.pass() && decaying) rep.notes = "Im m decreases as eps shrinks";
  return rep;
}

std::vector<double> resolved_grid(const spectral::AtomicMeasure& mu, double E, double hi,
                                  std::size_t count) {
  const double spacing = mu.spacing_near(E, hi);
  const double lo = spacing > 0.0 ? 10.0 * spacing * (1.0 + 1e-12) : 1e-3 * hi;
  if (!(lo < hi))
    throw Error(ErrorKind::ResolutionFloor,
                "atom spacing " + std::to_string(spacing) + " leaves no scales below " +
                    std::to_string(hi));
  return spectral::geometric_grid(hi, lo, count);
}

namespace {

ScanRow scan_row(const Context& ctx, const spectral::AtomicMeasure& mu, double beta, double E,
                 const ScanConfig& cfg) {
  ScanRow row;
  row.E = E;
  row.beta_hat = beta;
  try {
    row.L_hat = ctx.lyapunov(E);
    row.Lambda = std::min(row.L_hat, beta);
    if (beta > 0.0) {
      row.packing_bound = dimension::packing_bound(row.L_hat, beta);
      row.renyi_bound = dimension::renyi_bound(row.L_hat, beta);
    } else {
      const double v = row.L_hat > 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
      row.packing_bound = row.renyi_bound = v;
    }
    const auto& atoms = mu.atoms();
    if (atoms.empty()) throw Error(ErrorKind::EmptySample, "empty measure");
    const auto by_E = [](const spectral::Atom& a, double x) { return a.E < x; };
    // heaviest atom within eps_hi of E, else the nearest one
    auto lo = std::lower_bound(atoms.begin(), atoms.end(), E - cfg.eps_hi, by_E);
    auto hi = std::lower_bound(lo, atoms.end(), E + cfg.eps_hi, by_E);
    auto it = std::max_element(lo, hi, [](const auto& a, const auto& b) { return a.w < b.w; });
    if (lo == hi) {
      it = std::lower_bound(atoms.begin(), atoms.end(), E, by_E);
      if (it == atoms.end() || (it != atoms.begin() && E - (it - 1)->E < it->E - E)) --it;
    }
    row.atom_E = it->E;
    row.atom_w = it->w;
    const auto grid = resolved_grid(mu, row.atom_E, cfg.eps_hi, cfg.eps_count);
    const auto le = spectral::local_exponents(mu, row.atom_E, grid);
    row.gamma_minus = le.gamma_minus;
    row.gamma_plus = le.gamma_plus;
    const double b = std::isnan(row.packing_bound) ? 0.0 : row.packing_bound;
    row.eta_lo = std::clamp(b - cfg.eta_offset, 0.0, 1.0);
    row.eta_hi = std::clamp(b + cfg.eta_offset, 0.0, 1.0);
    row.trend_lo = spectral::to_string(spectral::lower_eta_derivative(mu, row.atom_E, row.eta_lo, grid).trend);
    row.trend_hi = spectral::to_string(spectral::lower_eta_derivative(mu, row.atom_E, row.eta_hi, grid).trend);
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

}  // namespace

std::vector<ScanRow> transition_scan(const Context& ctx, const spectral::AtomicMeasure& mu,
                                     std::span<const double> E_grid, const ScanConfig& config) {
  const double beta = ctx.beta();
  std::vector<ScanRow> rows(E_grid.size());
  const auto count = static_cast<std::int64_t>(E_grid.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i)
    rows[static_cast<std::size_t>(i)] =
        scan_row(ctx, mu, beta, E_grid[static_cast<std::size_t>(i)], config);
  return rows;
}

std::vector<ScanRow> transition_scan(const Context& ctx, std::span<const double> E_grid,
                                     const ScanConfig& config) {
  const auto mu = spectral::empirical_measure(ctx.op, config.N, config.bc_average);
  return transition_scan(ctx, mu, E_grid, config);
}

void write_csv(std::ostream& out, std::span<const ScanRow> rows) {
  out << "E,L_hat,beta_hat,Lambda,packing_bound,renyi_bound,atom_E,atom_w,gamma_minus,"
         "gamma_plus,eta_lo,trend_lo,eta_hi,trend_hi,error\n";
  out.precision(10);
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    out << r.E << ',' << r.L_hat << ',' << r.beta_hat << ',' << r.Lambda << ','
        << r.packing_bound << ',' << r.renyi_bound << ',' << r.atom_E << ',' << r.atom_w << ','
        << r.gamma_minus << ',' << r.gamma_plus << ',' << r.eta_lo << ',' << r.trend_lo << ','
        << r.eta_hi << ',' << r.trend_hi << ',' << err << '\n';
  }
}

VerificationReport check_atomic_regime(const Context& ctx, const spectral::AtomicMeasure& mu,
                                       double L_lo, double L_hi, double threshold,
                                       std::size_t samples, const ScanConfig& config) {
  json P{{"L_lo", L_lo}, {"L_hi", L_hi}, {"threshold", threshold}, {"samples", samples},
         {"eps_hi", config.eps_hi}, {"eps_count", config.eps_count}};
  const auto energies = dimension::sample_support(mu, samples);
  std::vector<double> L(energies.size()), gamma(energies.size(), kInf);
  std::vector<std::string> errs(energies.size());
  const auto count = static_cast<std::int64_t>(energies.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    L[k] = ctx.lyapunov(energies[k]);
    if (L[k] < L_lo || L[k] > L_hi) continue;
    try {
      const auto grid = resolved_grid(mu, energies[k], config.eps_hi, config.eps_count);
      gamma[k] = spectral::local_exponents(mu, energies[k], grid).gamma_plus;
    } catch (const Error& e) {
      errs[k] = e.what();
    }
  }
  std::vector<double> in;
  std::size_t failed = 0;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    if (L[k] < L_lo || L[k] > L_hi) continue;
    in.push_back(gamma[k]);
    if (!errs[k].empty()) ++failed;
  }
  P["in_regime"] = in.size();
  const auto [Lmin, Lmax] = std::minmax_element(L.begin(), L.end());
  P["L_min"] = *Lmin;
  P["L_max"] = *Lmax;
  if (2 * in.size() < energies.size())
    return VerificationReport::skipped("atomic_regime", P,
                                       "less than half the mu-weight has L_hat in range");
  std::sort(in.begin(), in.end());
  const std::size_t m = in.size();
  const double median = m % 2 ? in[m / 2] : 0.5 * (in[m / 2 - 1] + in[m / 2]);
  P["median_gamma_plus"] = median;
  auto rep = start("atomic_regime", P);
  rep.samples = m;
  rep.conclude(threshold - median);
  rep.notes = "samples failing the resolution check count as gamma+ = inf: " +
              std::to_string(failed);
  return rep;
}

VerificationReport check_eta_divergence(const Context& ctx, const spectral::AtomicMeasure& mu,
                                        double r_lo, double r_hi, double fraction,
                                        std::size_t samples, const ScanConfig& config) {
  const double beta = ctx.beta();
  json P{{"r_lo", r_lo}, {"r_hi", r_hi}, {"fraction", fraction}, {"samples", samples},
         {"beta", beta}, {"eta_offset", config.eta_offset}, {"eps_hi", config.eps_hi},
         {"eps_count", config.eps_count}};
  if (!(beta > 0.0)) return VerificationReport::skipped("eta_divergence", P, "beta estimate is 0");
  const auto energies = dimension::sample_support(mu, samples);
  std::vector<double> L(energies.size());
  std::vector<int> state(energies.size(), -1);  // -1 out of range, 0 not diverging, 1 diverging
  std::vector<int> clamped(energies.size(), 0);
  const auto count = static_cast<std::int64_t>(energies.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto k = static_cast<std::size_t>(i);
    L[k] = ctx.lyapunov(energies[k]);
    const double r = L[k] / beta;
    if (!(r > r_lo && r < r_hi)) continue;
    state[k] = 0;
    double eta = 2.0 * (1.0 - r) + config.eta_offset;
    if (eta > 1.0) {
      eta = 1.0;
      clamped[k] = 1;
    }
    try {
      const auto grid = resolved_grid(mu, energies[k], config.eps_hi, config.eps_count);
      if (spectral::lower_eta_derivative(mu, energies[k], eta, grid).trend ==
          spectral::Trend::Diverging)
        state[k] = 1;
    } catch (const Error&) {
    }
  }
  std::size_t in = 0, div = 0, n_clamped = 0;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    if (state[k] < 0) continue;
    ++in;
    div += static_cast<std::size_t>(state[k]);
    n_clamped += static_cast<std::size_t>(clamped[k]);
  }
  P["in_regime"] = in;
  const auto [Lmin, Lmax] = std::minmax_element(L.begin(), L.end());
  P["L_min"] = *Lmin;
  P["L_max"] = *Lmax;
  if (2 * in < energies.size())
    return VerificationReport::skipped("eta_divergence", P,
                                       "less than half the mu-weight has L_hat/beta in range");
  const double frac = static_cast<double>(div) / static_cast<double>(in);
  P["diverging_fraction"] = frac;
  auto rep = start("eta_divergence", P);
  rep.samples = in;
  rep.conclude(frac - fraction);
  rep.notes = "eta capped at 1 for " + std::to_string(n_clamped) + " samples";
  return rep;
}

}  // namespace qpspec::verify
