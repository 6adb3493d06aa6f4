#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "qpspec/error.hpp"
#include "qpspec/spectral.hpp"
#include "qpspec/subordinacy.hpp"
#include "qpspec/tridiag.hpp"

using namespace qpspec;
using namespace qpspec::spectral;
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

// root of m^2 + z m + 1 = 0 in the upper half plane
cplx free_m(cplx z) {
  const cplx r = std::sqrt(z * z - 4.0);
  const cplx a = (-z + r) / 2.0, b = (-z - r) / 2.0;
  return a.imag() > 0 ? a : b;
}

AtomicMeasure uniform_atoms(std::size_t n) {
  std::vector<Atom> atoms(n);
  for (std::size_t i = 0; i < n; ++i)
    atoms[i] = {(static_cast<double>(i) + 0.5) / static_cast<double>(n),
                1.0 / static_cast<double>(n)};
  return AtomicMeasure(std::move(atoms));
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("free half-line m against the closed form") {
  const auto op = free_op();
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> re(-3.0, 3.0), lg(-3.0, 0.0);
  double worst = 0.0;
  for (int k = 0; k < 50; ++k) {
    const cplx z{re(gen), std::pow(10.0, lg(gen))};
    const auto m = half_line_m(op, z, 0.0, Side::Plus, 1e-12);
    CHECK(m.converged);
    worst = std::max(worst, std::abs(m.value - free_m(z)));
  }
  CHECK(worst < 1e-8);
  const auto mi = half_line_m(op, {0.0, 1.0}, 0.0, Side::Plus, 1e-12);
  CHECK(std::abs(mi.value - free_m({0.0, 1.0})) < 1e-12);
  CHECK(mi.value.imag() > 0);
}

TEST_CASE("free half-line m with boundary angles") {
  const auto op = free_op();
  const cplx z{0.4, 0.3};
  const cplx m = free_m(z);
  for (double th : {0.3, 1.0, 2.5}) {
    const cplx plus = 1.0 / (-std::tan(th) - z - m);
    const cplx minus = 1.0 / (-1.0 / std::tan(th) - z - m);
    CHECK(std::abs(half_line_m(op, z, th, Side::Plus, 1e-13).value - plus) < 1e-10);
    CHECK(std::abs(half_line_m(op, z, th, Side::Minus, 1e-13).value - minus) < 1e-10);
  }
  // shifted conventions reduce to the plain half-line for a constant potential
  CHECK(std::abs(half_line_m(op, z, 0.5 * std::numbers::pi, Side::Plus, 1e-13).value - m) <
        1e-10);
  CHECK(std::abs(half_line_m(op, z, 0.0, Side::Minus, 1e-13).value - m) < 1e-10);
  CHECK(std::abs(half_line_m(op, z, 0.5 * std::numbers::pi, Side::Minus, 1e-13).value - m) <
        1e-10);
}

TEST_CASE("shifted half-lines use the neighbouring sites") {
  const auto op = saw_op(2.0, 0.37);
  const cplx z{0.2, 0.5};
  // theta = pi/2 on "+" starts at site 2 with no boundary term
  cplx g = 0.0;
  for (std::int64_t n = 400; n >= 2; --n) g = 1.0 / (op.potential(n) - z - g);
  CHECK(std::abs(half_line_m(op, z, 0.5 * std::numbers::pi, Side::Plus, 1e-13).value - g) <
        1e-10);
  cplx h = 0.0;
  for (std::int64_t n = -400; n <= -1; ++n) h = 1.0 / (op.potential(n) - z - h);
  CHECK(std::abs(half_line_m(op, z, 0.0, Side::Minus, 1e-13).value - h) < 1e-10);
}

TEST_CASE("herglotz and convergence contract") {
  const auto op = saw_op(3.0, 0.41);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> re(-3.5, 3.5), lg(-3.0, 0.5), th(0.0, std::numbers::pi);
  for (int k = 0; k < 100; ++k) {
    const cplx z{re(gen), std::pow(10.0, lg(gen))};
    const double t = th(gen);
    const Side s = k % 2 ? Side::Plus : Side::Minus;
    const auto m = half_line_m(op, z, t, s, 1e-9);
    CHECK(m.value.imag() > 0);
    const cplx further = half_line_m_fixed(op, z, t, s, 4 * m.truncation_N);
    CHECK(std::abs(further - m.value) < 2e-9 * std::abs(m.value));
  }
  CHECK_THROWS_AS(half_line_m(op, {0.0, 1e-7}, 0.0, Side::Plus), Error);
}

TEST_CASE("direct resolvent against a dense inverse") {
  const auto op = saw_op(2.0, 0.19);
  const cplx z{0.3, 1.0};
  const auto d = direct_resolvent(op, z, 1e-13);
  const int N = 150, n = 2 * N + 1;
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = op.potential(i - N) - z;
    if (i + 1 < n) A(i, i + 1) = A(i + 1, i) = 1.0;
  }
  const Eigen::MatrixXcd G = A.inverse();
  CHECK(std::abs(d.M0 - G(N, N)) < 1e-11);
  CHECK(std::abs(d.M1 - G(N + 1, N + 1)) < 1e-11);
}

TEST_CASE("combination identity") {
  const auto op = free_op();
  const cplx z{1.0, 1.0};
  const auto c = full_line_M(op, z, 1e-12);
  const auto d = direct_resolvent(op, z, 1e-12);
  CHECK(std::abs(c.M - d.M) < 1e-7);
  CHECK(std::abs(c.M0 - d.M0) < 1e-7);
  CHECK(std::abs(c.M1 - d.M1) < 1e-7);
  // free line: G(0,0) = 1 / (-z - 2 m)
  CHECK(std::abs(c.M0 - 1.0 / (-z - 2.0 * free_m(z))) < 1e-10);
  CHECK(c.M.imag() > 0);

  const auto saw = saw_op(1.0, 0.0);
  for (double E : {-1.7, -0.4, 0.1, 0.9, 1.8}) {
    const cplx w{E, 0.01};
    const auto cs = full_line_M(saw, w, 1e-9);
    const auto ds = direct_resolvent(saw, w, 1e-9);
    CHECK(std::abs(cs.M - ds.M) < 1e-5);
    CHECK(cs.M.imag() > 0);
  }

  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> re(-3.0, 3.0), lg(-2.0, 0.0);
  const auto op3 = saw_op(3.0, 0.77);
  const double tol = 1e-9;
  for (int k = 0; k < 20; ++k) {
    const cplx w{re(gen), std::pow(10.0, lg(gen))};
    const auto cs = full_line_M(op3, w, tol);
    const auto ds = direct_resolvent(op3, w, tol);
    CHECK(std::abs(cs.M - ds.M) < 10 * tol * std::abs(ds.M));
    CHECK(cs.M.imag() > 0);
  }
}

TEST_CASE("large half-line m on both sides forces large M") {
  // 2 lambda cos(2 pi n alpha) is even in n, so both half-lines share the
  // eigenvalues of the block [1, 600]; at those energies m+ and m- blow up together
  const OperatorPoint op(PotentialSpec(model::Cosine{1.5}), golden(), 0.0);
  Tridiag t = model::block_matrix(op, 1, 600);
  const std::size_t row0[1] = {0};
  const auto eig = eigen_restricted(t, row0);
  const std::vector<double> eps{1e-1, 3e-2, 1e-2, 3e-3, 1e-3};
  int tested = 0;
  for (double tt : {0.3, 0.5}) {
    for (std::size_t j = 0; j < eig.values.size(); ++j) {
      if (eig.components[0][j] * eig.components[0][j] < 0.01) continue;
      const double E = eig.values[j];
      bool cond = true;
      for (double e : eps)
        for (Side s : {Side::Plus, Side::Minus})
          cond = cond && half_line_m(op, {E, e}, 0.0, s, 1e-9).value.imag() >= std::pow(e, -tt);
      if (!cond) continue;
      ++tested;
      for (double e : eps)
        CHECK(full_line_M(op, {E, e}, 1e-9).M.imag() >= std::pow(e, -tt * 0.9));
    }
  }
  MESSAGE("test points meeting the two-sided condition: ", tested);
  CHECK(tested > 0);
}

TEST_CASE("a one-sided half-line bound does not force large M") {
  // E from a half-line block whose eigenvector sits at the boundary: m+ blows
  // up, yet the full line has no eigenvalue there
  const auto op = saw_op(6.0, 0.33);
  Tridiag t = model::block_matrix(op, 1, 600);
  const std::size_t row0[1] = {0};
  const auto eig = eigen_restricted(t, row0);
  std::size_t best = 0;
  for (std::size_t j = 0; j < eig.values.size(); ++j)
    if (std::fabs(eig.components[0][j]) > std::fabs(eig.components[0][best])) best = j;
  const double E = eig.values[best];
  const cplx z{E, 1e-3};
  CHECK(half_line_m(op, z, 0.0, Side::Plus, 1e-9).value.imag() > 100.0);
  CHECK(full_line_M(op, z, 1e-9).M.imag() < 1.0);
}

TEST_CASE("empirical measure of the free operator") {
  const auto op = free_op();
  const std::int64_t N = 60;
  const auto mu = empirical_measure(op, N, 1);
  CHECK(mu.total_mass() == doctest::Approx(2.0).epsilon(1e-12));
  const auto n = static_cast<double>(2 * N + 1);
  // Dirichlet Laplacian: psi_k(j) = sqrt(2/(n+1)) sin(pi k j/(n+1)), site 0 is j = N+1
  std::vector<Atom> expected;
  for (int k = 1; k <= 2 * N + 1; ++k) {
    const double a = std::numbers::pi * k / (n + 1);
    const double p0 = std::sin(a * (N + 1)), p1 = std::sin(a * (N + 2));
    expected.push_back({2.0 * std::cos(a), 2.0 / (n + 1) * (p0 * p0 + p1 * p1)});
  }
  const AtomicMeasure ref(expected);
  REQUIRE(ref.size() == mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    CHECK(mu.atoms()[i].E == doctest::Approx(ref.atoms()[i].E).epsilon(1e-12));
    CHECK(std::fabs(mu.atoms()[i].w - ref.atoms()[i].w) < 1e-12);
  }
  CHECK(mu.atoms().front().E > -2.0);
  CHECK(mu.atoms().back().E < 2.0);
  CHECK_THROWS_AS(empirical_measure(op, 49, 1), Error);
}

TEST_CASE("empirical measure averaging and self-consistency") {
  const auto op = saw_op(2.0, 0.23);
  for (std::int64_t B : {1, 2, 5}) {
    const auto mu = empirical_measure(op, 100, B);
    CHECK(mu.total_mass() == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(mu.bc_average() == B);
    CHECK(mu.size() == static_cast<std::size_t>(201 * B));
  }
  const auto a = empirical_measure(op, 200, 4);
  const auto b = empirical_measure(op, 400, 4);
  for (const auto& p : {saw_op(2.0, 0.23), saw_op(8.0), free_op(),
                        OperatorPoint(PotentialSpec(model::Cosine{0.5}), golden(), 0.2)}) {
    const double ks = ks_distance(empirical_measure(p, 200, 4), empirical_measure(p, 400, 4));
    MESSAGE(p.spec().name(), ": KS(N=200, N=400) = ", ks);
    CHECK(ks < 0.05);
  }
  const auto s = empirical_measure_serial(op, 200, 4);
  REQUIRE(s.size() == a.size());
  bool same = true;
  for (std::size_t i = 0; i < s.size(); ++i)
    same = same && s.atoms()[i].E == a.atoms()[i].E && s.atoms()[i].w == a.atoms()[i].w;
  CHECK(same);
  const OperatorPoint tan(PotentialSpec(model::TangentMonotone{1.0}), golden(), 0.0);
  CHECK_THROWS_AS(empirical_measure(tan, 60, 1), SingularSiteError);
}

TEST_CASE("atomic measures") {
  const AtomicMeasure mu({{1.0, 0.5}, {-1.0, 0.25}, {0.0, 0.25}});
  CHECK(mu.atoms().front().E == -1.0);
  CHECK(mu.total_mass() == 1.0);
  CHECK(mu.mass(-1.0, 1.0) == 0.25);
  CHECK(mu.mass(-1.5, 1.5) == 1.0);
  CHECK(mu.cdf(0.0) == 0.5);
  CHECK_THROWS_AS(AtomicMeasure({{0.0, -1.0}}), Error);
  std::ostringstream os;
  write_csv(os, mu);
  CHECK(os.str().rfind("E,w\n-1,0.25\n", 0) == 0);
}

TEST_CASE("lower eta derivative") {
  const auto grid = geometric_grid(0.1, 1e-4, 13);
  const AtomicMeasure point({{0.3, 1.0}});
  const auto d = lower_eta_derivative(point, 0.3, 0.5, grid);
  CHECK(d.trend == Trend::Diverging);
  CHECK(d.values.back() == doctest::Approx(1.0 / std::sqrt(1e-4)));
  CHECK(d.slope == doctest::Approx(-0.5));

  const auto uni = uniform_atoms(200000);
  const auto g2 = geometric_grid(0.1, 1e-3, 11);
  CHECK(lower_eta_derivative(uni, 0.5, 1.0, g2).trend == Trend::Bounded);
  CHECK(lower_eta_derivative(uni, 0.5, 0.5, g2).trend == Trend::Vanishing);
  const auto fine = geometric_grid(0.1, 1e-5, 9);
  CHECK_THROWS_AS(lower_eta_derivative(uni, 0.5, 1.0, fine), Error);
  const std::vector<double> up{1e-3, 1e-2};
  CHECK_THROWS_AS(lower_eta_derivative(uni, 0.5, 1.0, up), Error);
}

TEST_CASE("local exponents") {
  const auto grid = geometric_grid(0.1, 1e-4, 13);
  const AtomicMeasure point({{0.3, 1.0}});
  const auto p = local_exponents(point, 0.3, grid);
  CHECK(p.gamma_minus == 0.0);
  CHECK(p.gamma_plus == 0.0);

  const auto uni = uniform_atoms(1000000);
  const auto g = geometric_grid(0.1, 1e-3, 11);
  const auto u = local_exponents(uni, 0.5, g);
  // mu(ball) = 2 eps up to one atom
  CHECK(u.gamma_minus == doctest::Approx(1.0 + std::log(2.0) / std::log(g[5])).epsilon(1e-3));
  CHECK(u.gamma_plus == doctest::Approx(1.0 + std::log(2.0) / std::log(1e-3)).epsilon(1e-3));
  CHECK(u.gamma_minus <= u.gamma_plus);
  CHECK_THROWS_AS(local_exponents(point, 0.6, grid), Error);
}

TEST_CASE("subordinacy ratio") {
  const auto op = free_op();
  const std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
  const auto r = dynamics::subordinacy_check(op, 0.0, std::numbers::pi / 4, eps);
  MESSAGE(r.notes);
  CHECK(r.pass());
  for (const auto& row : r.parameters["rows"]) CHECK(row["rho"].get<double>() > 0.0);

  const auto saw = saw_op(1.0, 0.0);
  const auto s = dynamics::subordinacy_check(saw, 0.4, std::numbers::pi / 4, eps);
  MESSAGE(s.notes);
  CHECK(s.pass());
}

}  // TEST_SUITE
