#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "qpspec/dynamics.hpp"
#include "qpspec/error.hpp"

using namespace qpspec;
using namespace qpspec::dynamics;
using model::OperatorPoint;
using model::PotentialSpec;

namespace {

const arithmetic::CFExpansion& golden() {
  static const auto cf = arithmetic::parse_frequency("golden", 40);
  return cf;
}

OperatorPoint free_op() { return OperatorPoint(PotentialSpec::free(), golden(), 0.0); }

OperatorPoint saw_op(double gamma, double x = 0.1) {
  return OperatorPoint(PotentialSpec(model::Sawtooth{gamma, -0.5 * gamma}), golden(), x);
}

double log_add(double a, double b) {
  if (std::isinf(a) && a < 0) return b;
  if (std::isinf(b) && b < 0) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(std::min(a, b) - m));
}

// Window sites and weights for ||.||_L^{sign}.
std::vector<std::pair<std::int64_t, double>> window(double L, Side sign) {
  const auto F = static_cast<std::int64_t>(std::floor(L));
  const double frac = L - static_cast<double>(F);
  std::vector<std::pair<std::int64_t, double>> out;
  if (sign == Side::Plus) {
    for (std::int64_t n = 1; n <= F; ++n) out.emplace_back(n, 1.0);
    if (frac > 0) out.emplace_back(F + 1, frac);
  } else {
    if (frac > 0) out.emplace_back(-F - 1, frac);
    for (std::int64_t n = -F; n <= 0; ++n) out.emplace_back(n, 1.0);
  }
  return out;
}

// log det of the Gram matrix of v, w through the Lagrange identity
// det = sum_{i<j} c_i c_j (v_i w_j - v_j w_i)^2. For fixed i the bracket is
// the solution s with s(i) = 0, s(i+1) = 1, run here in long double.
double lagrange_log_det(const OperatorPoint& op, double E, double L, Side sign) {
  const auto sites = window(L, sign);
  double acc = -std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < sites.size(); ++a) {
    const std::int64_t i = sites[a].first;
    long double prev = 0.0L, cur = 1.0L;
    long double scale = 0.0L;
    std::int64_t n = i + 1;
    for (std::size_t b = a + 1; b < sites.size(); ++b) {
      const std::int64_t j = sites[b].first;
      while (n < j) {
        const long double next = (E - op.potential(n)) * cur - prev;
        prev = cur;
        cur = next;
        ++n;
        const long double mag = std::fabs(cur) + std::fabs(prev);
        if (mag > 1e100L) {
          cur /= mag;
          prev /= mag;
          scale += std::log(mag);
        }
      }
      if (cur == 0.0L) continue;
      const double term = static_cast<double>(2.0L * (std::log(std::fabs(cur)) + scale)) +
                          std::log(sites[a].second * sites[b].second);
      acc = log_add(acc, term);
    }
  }
  return acc;
}

// min / max of ||u_theta||_L^2 from a 720-point grid refined by golden sections.
std::pair<double, double> grid_extremes(const OperatorPoint& op, double E, double L, Side sign) {
  const auto F = static_cast<std::int64_t>(std::floor(L));
  auto f = [&](double th) {
    return std::pow(truncated_norm(solve_theta(op, E, th, -F - 2, F + 2), L, sign), 2);
  };
  const double h = std::numbers::pi / 720.0;
  auto refine = [&](double c, double s) {
    double a = c - h, b = c + h;
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 80; ++it) {
      const double x1 = b - r * (b - a), x2 = a + r * (b - a);
      if (s * f(x1) < s * f(x2))
        b = x2;
      else
        a = x1;
    }
    return f(0.5 * (a + b));
  };
  double best_lo = 0, best_hi = 0, vlo = INFINITY, vhi = -INFINITY;
  for (int k = 0; k < 720; ++k) {
    const double th = k * h;
    const double v = f(th);
    if (v < vlo) vlo = v, best_lo = th;
    if (v > vhi) vhi = v, best_hi = th;
  }
  return {refine(best_lo, 1.0), refine(best_hi, -1.0)};
}

}  // namespace

TEST_SUITE("dynamics") {

TEST_CASE("transfer matrices") {
  const auto op = free_op();
  const auto t = transfer_matrix(op, 0.0, 5);
  CHECK(t[0][0] == 0.0);
  CHECK(t[0][1] == -1.0);
  CHECK(t[1][0] == 1.0);
  CHECK(t[1][1] == 0.0);
  const auto saw = saw_op(3.0);
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> U(-4, 4);
  for (int k = 0; k < 1000; ++k) {
    const auto m = transfer_matrix(saw, U(gen), static_cast<std::int64_t>(U(gen) * 100));
    CHECK(m[0][0] * m[1][1] - m[0][1] * m[1][0] == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("cocycle examples") {
  const auto op = free_op();
  CHECK(cocycle_lognorm(op, 0.7, 0).log_norm == 0.0);
  // T(0)^4 = Id
  CHECK(std::fabs(cocycle_lognorm(op, 0.0, 4).log_norm) < 1e-14);
  CHECK(std::fabs(cocycle_lognorm(op, 0.0, -4).log_norm) < 1e-14);
  // T(3)^n = lam^n P + lam^-n Q with P the rank-one spectral projector
  const double lam = (3.0 + std::sqrt(5.0)) / 2.0;
  const double p_norm = std::hypot(std::hypot(3.0 - 1.0 / lam, 1.0), std::hypot(1.0, 1.0 / lam)) /
                        (lam - 1.0 / lam);
  const double l40 = cocycle_lognorm(op, 3.0, 40).log_norm;
  CHECK(l40 == doctest::Approx(40.0 * std::log(lam) + std::log(p_norm)).epsilon(1e-12));
  CHECK(l40 / 40.0 == doctest::Approx(std::log(lam)).epsilon(0.01));
}

TEST_CASE("cocycle matches a direct product") {
  const auto op = saw_op(2.5, 0.37);
  for (double E : {-2.0, 0.3, 1.9}) {
    Eigen::Matrix2d fwd = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d bwd = Eigen::Matrix2d::Identity();
    for (std::int64_t n = 1; n <= 50; ++n) {
      Eigen::Matrix2d t;
      t << E - op.potential(n), -1.0, 1.0, 0.0;
      fwd = t * fwd;
      Eigen::Matrix2d s;
      s << E - op.potential(1 - n), -1.0, 1.0, 0.0;
      bwd = s.inverse() * bwd;
      const double direct = std::log(fwd.jacobiSvd().singularValues()(0));
      CHECK(cocycle_lognorm(op, E, n).log_norm == doctest::Approx(direct).epsilon(1e-10));
      const double direct_b = std::log(bwd.jacobiSvd().singularValues()(0));
      CHECK(cocycle_lognorm(op, E, -n).log_norm == doctest::Approx(direct_b).epsilon(1e-10));
    }
  }
}

TEST_CASE("cocycle determinant stays one") {
  const auto op = saw_op(4.0, 0.21);
  for (double E : {0.0, 1.3}) {
    for (std::int64_t n : {std::int64_t{1000}, std::int64_t{-1000}, std::int64_t{100000},
                           std::int64_t{-100000}}) {
      const auto [m, ls] = cocycle_product(op, E, n);
      const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
      const double unit = std::exp(-2.0 * ls);
      const double ref = std::max(unit, std::pow(operator_norm(m), 2));
      CHECK(std::fabs(det - unit) / ref < 1e-8);
    }
  }
}

TEST_CASE("lyapunov free operator") {
  const auto op = free_op();
  const auto l0 = lyapunov(op, 0.0, 10000, 64, 1);
  CHECK(std::fabs(l0.L_hat) < 0.01);
  const auto l3 = lyapunov(op, 3.0, 10000, 64, 1);
  CHECK(std::fabs(l3.L_hat - std::log((3.0 + std::sqrt(5.0)) / 2.0)) < 0.005);
  CHECK(l3.phases == 64);
  CHECK(l3.skipped == 0);
  CHECK_THROWS_AS(lyapunov(op, 0.0, 999, 64), Error);
  CHECK_THROWS_AS(lyapunov(op, 0.0, 1000, 31), Error);
}

TEST_CASE("lyapunov sawtooth stability") {
  const auto op = saw_op(4.0);
  const auto a = lyapunov(op, 0.0, 10000, 64, 1);
  const auto b = lyapunov(op, 0.0, 20000, 64, 1);
  const auto c = lyapunov(op, 0.0, 10000, 64, 99);
  MESSAGE("sawtooth gamma=4: L=", a.L_hat, " stderr=", a.stderr_, " L(2n)=", b.L_hat,
          " other seed=", c.L_hat);
  CHECK(a.L_hat > 0.0);
  CHECK(std::fabs(a.L_hat - c.L_hat) < 0.02);
  // (1/n) log ||Phi_n|| carries an O(1/n) bias on top of the phase spread
  CHECK(std::fabs(a.L_hat - b.L_hat) < std::max(a.stderr_, 1.0 / 10000.0));
}

TEST_CASE("lyapunov serial and parallel agree bitwise") {
  const auto op = saw_op(3.0);
  const auto p = lyapunov(op, 0.4, 4000, 48, 7);
  const auto s = lyapunov_serial(op, 0.4, 4000, 48, 7);
  CHECK(p.L_hat == s.L_hat);
  CHECK(p.stderr_ == s.stderr_);
  const std::vector<double> es{-1.0, 0.0, 0.5, 2.0, 3.5};
  const auto ps = lyapunov_sweep(op, es, 2000, 32, 3);
  const auto ss = lyapunov_sweep_serial(op, es, 2000, 32, 3);
  for (std::size_t i = 0; i < es.size(); ++i) {
    CHECK(ps[i].L_hat == ss[i].L_hat);
    CHECK(ps[i].energy == es[i]);
  }
}

TEST_CASE("lyapunov skips pole phases") {
  // every phase hits a pole at one of the first few sites only when x ~ 0,
  // so a tangent model should run without skips at generic offsets
  const OperatorPoint op(PotentialSpec(model::TangentMonotone{1.0}), golden(), 0.0);
  const auto r = lyapunov(op, 0.0, 2000, 64, 11);
  CHECK(r.skipped == 0);
  CHECK(r.L_hat > 0.0);
}

TEST_CASE("solutions") {
  const auto op = free_op();
  const auto u = solve_theta(op, 0.0, 0.0, -8, 8);
  for (std::int64_t n = -8; n <= 8; ++n)
    CHECK(u.value(n) == doctest::Approx(std::sin(std::numbers::pi * n / 2.0)).epsilon(1e-14));
  const auto w = solve_theta(op, 0.0, 0.5 * std::numbers::pi, -3, 3);
  CHECK(w.value(0) == doctest::Approx(-1.0));
  CHECK(std::fabs(w.value(1)) < 1e-15);
  CHECK_THROWS_AS(solve_theta(op, 0.0, 0.0, 1, 5), Error);
  CHECK_THROWS_AS(u.value(9), Error);

  // growing solutions stay finite in log form
  const auto big = solve_theta(saw_op(4.0), 0.0, 0.3, -20000, 20000);
  CHECK(std::isfinite(big.log_abs(20000)));
  CHECK(big.log_abs(20000) > 1000.0);
}

TEST_CASE("solutions satisfy the recurrence") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const auto op = trial % 2 ? saw_op(0.5 + 8.0 * U(gen), U(gen)) : free_op();
    const double E = -4.0 + 8.0 * U(gen), theta = std::numbers::pi * U(gen);
    const auto u = solve_theta(op, E, theta, -3000, 3000);
    for (std::int64_t n = -2999; n <= 2999; n += 97) {
      const double shift =
          std::max({u.log_abs(n - 1), u.log_abs(n), u.log_abs(n + 1)});
      const double r = u.scaled(n - 1, shift) + u.scaled(n + 1, shift) +
                       (model::sample_potential(op, n) - E) * u.scaled(n, shift);
      CHECK(std::fabs(r) < 1e-12 * std::max(1.0, std::fabs(model::sample_potential(op, n) - E)));
    }
  }
}

TEST_CASE("wronskian residual") {
  const auto op = free_op();
  const auto u = solve_theta(op, 0.0, 0.0, -20, 20);
  const auto v = solve_theta(op, 0.0, complementary_angle(0.0), -20, 20);
  CHECK(wronskian_residual(u, v, 0) == 0.0);
  CHECK(wronskian_residual(u, v, 17) < 1e-12);

  const auto saw = saw_op(3.0, 0.43);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> E(-4.0, 4.0), T(0.0, std::numbers::pi);
  std::uniform_int_distribution<std::int64_t> N(-10000, 10000);
  double worst = 0.0;
  for (int k = 0; k < 40; ++k) {
    const double e = E(gen), th = T(gen);
    const auto a = solve_theta(saw, e, th, -10001, 10001);
    const auto b = solve_theta(saw, e, complementary_angle(th), -10001, 10001);
    for (int j = 0; j < 25; ++j) worst = std::max(worst, wronskian_residual(a, b, N(gen)));
  }
  CHECK(worst < 1e-8);

  const auto bad = solve_theta(op, 0.0, 0.3, -2, 2);
  CHECK_THROWS_AS(wronskian_residual(u, bad, 0), Error);
  const auto other = solve_theta(op, 0.1, complementary_angle(0.0), -20, 20);
  CHECK_THROWS_AS(wronskian_residual(u, other, 0), Error);
}

TEST_CASE("truncated norms") {
  const auto op = free_op();
  const auto u = solve_theta(op, 0.0, 0.0, -10, 10);
  CHECK(truncated_norm(u, 4.0, Side::Plus) == doctest::Approx(std::sqrt(2.0)));
  CHECK(truncated_norm(u, 4.5, Side::Plus) == doctest::Approx(std::sqrt(2.5)));
  CHECK(truncated_norm(u, 0.0, Side::Plus) == 0.0);
  // minus side: u(0) = 0, u(-1) = -1, u(-2) = 0, u(-3) = 1
  CHECK(truncated_norm(u, 0.0, Side::Minus) == 0.0);
  CHECK(truncated_norm(u, 3.0, Side::Minus) == doctest::Approx(std::sqrt(2.0)));
  CHECK(truncated_norm(u, 0.5, Side::Minus) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(truncated_norm(u, 10.0, Side::Plus), Error);
  CHECK_THROWS_AS(truncated_norm(u, -1.0, Side::Plus), Error);
}

TEST_CASE("gram extremes free example") {
  const auto op = free_op();
  const auto g = gram_extremes(op, 0.0, 4.0, Side::Plus);
  CHECK(g.omega() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.eig_min() == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(g.eig_max() == doctest::Approx(2.0).epsilon(1e-12));
  const auto G = g.gram();
  CHECK(G[0][0] == doctest::Approx(2.0));
  CHECK(std::fabs(G[0][1]) < 1e-12);
  const auto [lo, hi] = grid_extremes(op, 0.0, 4.0, Side::Plus);
  CHECK(std::sqrt(lo * hi) == doctest::Approx(g.omega()).epsilon(1e-6));
}

TEST_CASE("gram extremes against a theta grid") {
  struct Case {
    double gamma, E, L;
    Side sign;
  };
  for (const Case c : {Case{1.0, 0.3, 7.5, Side::Plus}, Case{1.0, 0.3, 7.5, Side::Minus},
                       Case{3.0, -0.7, 12.0, Side::Plus}, Case{3.0, 1.1, 9.25, Side::Minus},
                       Case{0.5, 2.2, 20.0, Side::Plus}}) {
    const auto op = saw_op(c.gamma, 0.29);
    const auto g = gram_extremes(op, c.E, c.L, c.sign);
    const auto [lo, hi] = grid_extremes(op, c.E, c.L, c.sign);
    CHECK(g.eig_min() == doctest::Approx(lo).epsilon(1e-6));
    CHECK(g.eig_max() == doctest::Approx(hi).epsilon(1e-6));
    CHECK(g.omega() == doctest::Approx(std::sqrt(lo * hi)).epsilon(1e-6));
    const auto F = static_cast<std::int64_t>(c.L) + 2;
    const double at_min =
        std::pow(truncated_norm(solve_theta(op, c.E, g.theta_min, -F, F), c.L, c.sign), 2);
    const double at_max =
        std::pow(truncated_norm(solve_theta(op, c.E, g.theta_max, -F, F), c.L, c.sign), 2);
    CHECK(at_min == doctest::Approx(lo).epsilon(1e-6));
    CHECK(at_max == doctest::Approx(hi).epsilon(1e-6));
    // omega^2 = det G from the returned entries
    const auto G = g.gram();
    const double cond = g.eig_max() / g.eig_min();
    CHECK(G[0][0] * G[1][1] - G[0][1] * G[0][1] ==
          doctest::Approx(g.det()).epsilon(std::max(1e-10, 1e-15 * cond)));
    CHECK(g.log_det == doctest::Approx(lagrange_log_det(op, c.E, c.L, c.sign)).epsilon(1e-10));
  }
}

TEST_CASE("omega determinant for long windows") {
  for (Side sign : {Side::Plus, Side::Minus}) {
    const auto op = saw_op(4.0, 0.61);
    OmegaProfile p(op, 0.2, sign, 200.0);
    CHECK(p.log_omega(sign == Side::Plus ? 1.0 : 0.0) == -INFINITY);
    for (double L : {1.5, 2.5, 17.0, 64.3, 150.0, 200.0}) {
      const double ref = lagrange_log_det(op, 0.2, L, sign);
      CHECK(2.0 * p.log_omega(L) == doctest::Approx(ref).epsilon(1e-10));
    }
    const auto g = p.at(200.0);
    CHECK(std::isfinite(g.log_eig_min));
    CHECK(g.log_eig_max + g.log_eig_min == doctest::Approx(g.log_det).epsilon(1e-12));
  }
}

TEST_CASE("omega grows with L") {
  for (Side sign : {Side::Plus, Side::Minus}) {
    const auto op = saw_op(2.0, 0.13);
    OmegaProfile p(op, 0.5, sign, 300.0);
    double prev = -INFINITY;
    for (int k = 0; k <= 3000; ++k) {
      const double v = p.log_omega(0.1 * k);
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
  }
  // omega_-(L) -> 0 as L -> 0+
  const auto op = free_op();
  CHECK(gram_extremes(op, 0.0, 1e-9, Side::Minus).omega() < 1e-4);
  CHECK(gram_extremes(op, 0.0, 0.0, Side::Minus).omega() == 0.0);
}

TEST_CASE("length scale") {
  const auto op = free_op();
  const double l1 = length_scale(op, 0.0, 1e-3, Side::Plus);
  const double l2 = length_scale(op, 0.0, 5e-4, Side::Plus);
  CHECK(l2 / l1 == doctest::Approx(2.0).epsilon(0.05));
  OmegaProfile p(op, 0.0, Side::Plus, l1);
  CHECK(std::exp(p.log_omega(l1)) == doctest::Approx(1e3).epsilon(1e-6));

  const auto saw = saw_op(3.0);
  const double ls = length_scale(saw, 0.4, 1e-30, Side::Minus);
  OmegaProfile q(saw, 0.4, Side::Minus, ls);
  CHECK(q.log_omega(ls) == doctest::Approx(30.0 * std::log(10.0)).epsilon(1e-7));

  // omega_-(1) = 1 for the free operator at E = 0
  CHECK_THROWS_AS(length_scale(op, 0.0, 1.0, Side::Minus), Error);
  CHECK_THROWS_AS(length_scale(op, 0.0, 2.0, Side::Minus), Error);
  CHECK_THROWS_AS(length_scale(op, 0.0, 0.0, Side::Plus), Error);
}

TEST_CASE("regular sites bound omega from below") {
  const auto op = saw_op(20.0, 0.47);
  const double E = 0.3, mu = 1.0;
  const double L = 60.0;
  OmegaProfile p(op, E, Side::Plus, L);
  const model::Interval win{1, 60};
  int used = 0;
  for (std::int64_t n : {5, 9, 15, 21}) {
    for (std::int64_t k = 1; k + 1 <= 60; ++k) {
      const auto a = model::regular_check(op, E, k, mu, n, win);
      if (!a.interval) continue;
      const auto b = model::regular_check(op, E, k + 1, mu, n, win);
      if (!b.interval) continue;
      ++used;
      CHECK(p.log_omega(L) > mu * static_cast<double>(n) / 2.0 - std::log(4.0));
    }
  }
  MESSAGE("regular pairs used: ", used);
  CHECK(used > 0);
}

}  // TEST_SUITE
