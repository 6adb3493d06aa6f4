#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "qpspec/dimension.hpp"
#include "qpspec/error.hpp"

using namespace qpspec;
using namespace qpspec::dimension;
using spectral::Atom;

namespace {

std::vector<Atom> uniform(std::size_t n, double lo = 0.0, double hi = 1.0, double mass = 1.0) {
  std::vector<Atom> atoms(n);
  for (std::size_t i = 0; i < n; ++i)
    atoms[i] = {lo + (hi - lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n),
                mass / static_cast<double>(n)};
  return atoms;
}

}  // namespace

TEST_SUITE("dimension") {

TEST_CASE("closed-form bounds") {
  CHECK(packing_bound(1.0, 1.0) == 0.0);
  CHECK(packing_bound(0.5, 1.0) == 1.0);
  CHECK(packing_bound(2.0, 1.0) == 0.0);
  CHECK(packing_bound(0.8, 1.0) == doctest::Approx(0.4));
  CHECK(renyi_bound(1.0, 1.0) == 0.0);
  CHECK(renyi_bound(0.0, 1.0) == 1.0);
  CHECK(renyi_bound(0.5, 1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(renyi_bound(3.0, 1.0) == 0.0);
  CHECK_THROWS_AS(packing_bound(1.0, 0.0), Error);
  CHECK_THROWS_AS(renyi_bound(1.0, 0.0), Error);
}

TEST_CASE("bounds are monotone in L") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> U(0.05, 3.0);
  for (int k = 0; k < 20; ++k) {
    const double beta = U(gen), L1 = U(gen), L2 = U(gen);
    const double lo = std::min(L1, L2), hi = std::max(L1, L2);
    CHECK(packing_bound(lo, beta) >= packing_bound(hi, beta));
    CHECK(renyi_bound(lo, beta) >= renyi_bound(hi, beta));
    CHECK(packing_bound(beta, beta) == 0.0);
    CHECK(renyi_bound(beta, beta) == 0.0);
  }
}

TEST_CASE("renyi sums") {
  const AtomicMeasure point({{0.37, 1.0}});
  for (double e : {0.1, 0.01, 1e-5})
    for (double q : {0.5, 2.0, 3.0}) CHECK(renyi_sum(point, q, e) == doctest::Approx(1.0));
  const AtomicMeasure two({{0.15, 0.5}, {0.75, 0.5}});
  CHECK(renyi_sum(two, 2.0, 0.1) == doctest::Approx(0.5));

  const std::size_t M = 1200;
  const AtomicMeasure uni(uniform(M));
  for (std::size_t k : {1, 2, 3, 4, 6, 10, 40}) {
    const double eps = static_cast<double>(k) / static_cast<double>(M);
    const double frac = static_cast<double>(k) / static_cast<double>(M);
    for (double q : {1.5, 2.0}) {
      CHECK(renyi_sum(uni, q, eps) ==
            doctest::Approx(static_cast<double>(M / k) * std::pow(frac, q)).epsilon(1e-9));
    }
    CHECK(renyi_sum(uni, 1.0, eps) == doctest::Approx(uni.total_mass()));
  }
  // merging two cells into one raises the sum for q > 1 and lowers it for q < 1
  const AtomicMeasure apart({{0.05, 0.3}, {0.15, 0.7}});
  const AtomicMeasure merged({{0.05, 0.3}, {0.06, 0.7}});
  CHECK(renyi_sum(merged, 2.0, 0.1) > renyi_sum(apart, 2.0, 0.1));
  CHECK(renyi_sum(merged, 0.5, 0.1) < renyi_sum(apart, 0.5, 0.1));
  CHECK(renyi_sum(merged, 1.0, 0.1) == doctest::Approx(renyi_sum(apart, 1.0, 0.1)));
}

TEST_CASE("renyi dimension calibration") {
  const auto grid = default_grid(0.1, 12);
  CHECK(grid.size() == 12);
  CHECK(grid[1] == 0.05);
  const AtomicMeasure point({{0.5, 1.0}});
  const auto p = renyi_dimension(point, 2.0, grid);
  CHECK(p.estimate == 0.0);
  CHECK(p.target == "renyi(2.000000)");

  const AtomicMeasure uni(uniform(1 << 20));
  const auto u = renyi_dimension(uni, 2.0, grid);
  MESSAGE("uniform Renyi(2) estimate ", u.estimate);
  CHECK(std::fabs(u.estimate - 1.0 / 3.0) < 0.05);

  auto mix_atoms = uniform(1 << 20, 0.0, 1.0, 0.5);
  mix_atoms.push_back({0.3, 0.5});
  const auto g2 = default_grid(1e-2, 10);
  const auto m = renyi_dimension(AtomicMeasure(mix_atoms), 2.0, g2);
  MESSAGE("mixture Renyi(2) estimate ", m.estimate);
  CHECK(m.estimate < 0.1);

  const AtomicMeasure sparse(uniform(1000));
  CHECK_THROWS_AS(renyi_dimension(sparse, 2.0, grid), Error);
  CHECK_THROWS_AS(renyi_dimension(point, 1.0, grid), Error);
}

TEST_CASE("support sampling") {
  const AtomicMeasure mu({{0.0, 0.75}, {1.0, 0.25}});
  const auto s = sample_support(mu, 4);
  CHECK(s == std::vector<double>{0.0, 0.0, 0.0, 1.0});
  CHECK(sample_support(mu, 4) == s);
  CHECK_THROWS_AS(sample_support(AtomicMeasure(), 3), Error);
  const std::vector<double> v{0.1, 0.9, 0.5}, w{1.0, 0.01, 1.0};
  CHECK(weighted_quantile(v, w, 0.95) == 0.5);
  CHECK(weighted_quantile(v, {}, 0.95) == 0.9);
}

TEST_CASE("packing estimate calibration") {
  const auto grid = spectral::geometric_grid(1e-2, 1e-4, 9);
  const AtomicMeasure point({{0.5, 1.0}});
  CHECK(packing_dim_estimate(point, sample_support(point, 10), grid).estimate == 0.0);

  const AtomicMeasure uni(uniform(1 << 20));
  const auto u = packing_dim_estimate(uni, sample_support(uni, 200), grid);
  MESSAGE("uniform packing estimate ", u.estimate);
  CHECK(u.estimate > 0.9);

  const auto fine = spectral::geometric_grid(1e-3, 1e-12, 11);
  const AtomicMeasure pp({{0.2, 0.6}, {0.7, 0.4}});
  CHECK(packing_dim_estimate(pp, sample_support(pp, 50), fine).estimate < 0.1);

  auto mix_atoms = uniform(1 << 20, 0.0, 1.0, 0.5);
  mix_atoms.push_back({0.3, 0.5});
  const AtomicMeasure mix(mix_atoms);
  const auto m = packing_dim_estimate(mix, sample_support(mix, 200), grid);
  MESSAGE("mixture packing estimate ", m.estimate);
  CHECK(m.estimate > 0.85);

  CHECK_THROWS_AS(packing_dim_estimate(point, std::vector<double>{}, grid), Error);
}

TEST_CASE("report serialization") {
  const AtomicMeasure uni(uniform(1 << 16));
  auto r = renyi_dimension(uni, 2.0, default_grid(0.1, 6));
  r.bound = renyi_bound(0.0, 1.0);
  const auto j = to_json(r);
  CHECK(j["bound"] == 1.0);
  CHECK(j["slack"].get<double>() == doctest::Approx(r.estimate - 1.0));
  CHECK(j["grid"].size() == 6);
  CHECK(j["normalization"].get<std::string>().find("(q+1)") != std::string::npos);
  std::ostringstream os;
  write_csv(os, r);
  CHECK(os.str().rfind("eps,ratio\n", 0) == 0);
  const auto fresh = to_json(renyi_dimension(uni, 2.0, default_grid(0.1, 6)));
  CHECK(fresh["bound"].is_null());
}

}  // TEST_SUITE
