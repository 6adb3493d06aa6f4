#include "qpspec/selftest.hpp"

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <random>

#include "qpspec/dynamics.hpp"
#include "qpspec/error.hpp"
#include "qpspec/model.hpp"
#include "qpspec/spectral.hpp"

namespace qpspec::selftest {

using dynamics::Side;
using model::OperatorPoint;
using model::PotentialSpec;
using cplx = std::complex<double>;

namespace {

using Clock = std::chrono::steady_clock;

const arithmetic::CFExpansion& golden() {
  static const auto cf = arithmetic::parse_frequency("golden", 30);
  return cf;
}

// a sawtooth, cosine or free operator with moderate coupling at a random phase
OperatorPoint random_operator(std::mt19937_64& gen, double max_coupling) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int kind = static_cast<int>(U(gen) * 3.0);
  const double c = 0.2 + (max_coupling - 0.2) * U(gen);
  PotentialSpec spec = kind == 0   ? PotentialSpec(model::Sawtooth{c, -0.5 * c})
                       : kind == 1 ? PotentialSpec(model::Cosine{0.5 * c})
                                   : PotentialSpec::free();
  return OperatorPoint(spec, golden(), U(gen));
}

FamilyResult begin(const char* name, double tol) {
  FamilyResult r;
  r.name = name;
  r.tolerance = tol;
  return r;
}

void finish(FamilyResult& r, Clock::time_point t0) {
  r.pass = r.worst < r.tolerance && r.samples > 0;
  r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
}

cplx free_m(cplx z) {
  const cplx s = std::sqrt(z * z - 4.0);
  const cplx a = (-z + s) / 2.0, b = (-z - s) / 2.0;
  return a.imag() > 0 ? a : b;
}

std::size_t count_or(const Options& o, std::size_t d) { return o.samples ? o.samples : d; }

}  // namespace

FamilyResult wronskian(const Options& opt) {
  const auto t0 = Clock::now();
  auto r = begin("wronskian", 1e-8);
  std::mt19937_64 gen(opt.seed);
  std::uniform_real_distribution<double> E(-3.0, 3.0), th(0.0, std::numbers::pi);
  std::uniform_int_distribution<std::int64_t> site(-10000, 10000);
  const std::size_t count = count_or(opt, 1000);
  for (std::size_t k = 0; k < count; ++k) {
    const auto op = random_operator(gen, 4.0);
    const double e = E(gen), theta = th(gen);
    const std::int64_t n = site(gen);
    const std::int64_t lo = std::min<std::int64_t>(n, 0) - 1, hi = std::max<std::int64_t>(n + 1, 1) + 1;
    const auto u = dynamics::solve_theta(op, e, theta, lo, hi);
    const auto v = dynamics::solve_theta(op, e, dynamics::complementary_angle(theta), lo, hi);
    r.worst = std::max(r.worst, dynamics::wronskian_residual(u, v, n));
    ++r.samples;
  }
  finish(r, t0);
  return r;
}

FamilyResult expansion(const Options& opt) {
  const auto t0 = Clock::now();
  auto r = begin("expansion", 1e-9);
  std::mt19937_64 gen(opt.seed + 1);
  std::uniform_real_distribution<double> E(-3.0, 3.0), th(0.0, std::numbers::pi), U(0.0, 1.0);
  std::uniform_int_distribution<std::int64_t> start(-500, 500), len(1, 200);
  const std::size_t count = count_or(opt, 1000);
  while (r.samples < count && r.redrawn < 10 * count) {
    const auto op = random_operator(gen, 4.0);
    const double e = E(gen), theta = th(gen);
    const std::int64_t n1 = start(gen), n2 = n1 + len(gen) - 1;
    const std::int64_t n = n1 + static_cast<std::int64_t>(U(gen) * static_cast<double>(n2 - n1 + 1));
    const auto u = dynamics::solve_theta(op, e, theta, std::min<std::int64_t>(n1 - 1, 0),
                                         std::max<std::int64_t>(n2 + 1, 1));
    try {
      r.worst = std::max(r.worst, model::expansion_residual(op, u, std::min(n, n2), n1, n2));
      ++r.samples;
    } catch (const NearSingularEnergyError&) {
      ++r.redrawn;
    }
  }
  finish(r, t0);
  return r;
}

FamilyResult gram(const Options& opt) {
  const auto t0 = Clock::now();
  auto r = begin("gram", 1e-10);
  std::mt19937_64 gen(opt.seed + 2);
  std::uniform_real_distribution<double> E(-2.5, 2.5), Ls(2.0, 40.0), U(0.0, 1.0);
  const std::size_t count = count_or(opt, 200);
  for (std::size_t k = 0; k < count; ++k) {
    const auto op = random_operator(gen, 2.0);
    const double e = E(gen), L = Ls(gen);
    const Side s = U(gen) < 0.5 ? Side::Plus : Side::Minus;
    const auto gp = dynamics::gram_extremes(op, e, L, s);
    const auto span = static_cast<std::int64_t>(L) + 3;
    const auto umax = dynamics::solve_theta(op, e, gp.theta_max, -span, span);
    const auto umin = dynamics::solve_theta(op, e, gp.theta_min, -span, span);
    const double log_w2 =
        2.0 * (dynamics::log_truncated_norm(umax, L, s) + dynamics::log_truncated_norm(umin, L, s));
    r.worst = std::max(r.worst, std::fabs(std::expm1(log_w2 - gp.log_det)));
    ++r.samples;
  }
  finish(r, t0);
  return r;
}

FamilyResult m_free(const Options& opt) {
  const auto t0 = Clock::now();
  auto r = begin("m-free", 1e-8);
  std::mt19937_64 gen(opt.seed + 3);
  std::uniform_real_distribution<double> re(-3.0, 3.0), lg(-3.0, 0.0);
  const OperatorPoint op(PotentialSpec::free(), golden(), 0.0);
  const std::size_t count = count_or(opt, 50);
  std::size_t not_herglotz = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const cplx z{re(gen), std::pow(10.0, lg(gen))};
    const auto m = spectral::half_line_m(op, z, 0.0, Side::Plus, 1e-12);
    if (!(m.value.imag() > 0.0)) ++not_herglotz;
    r.worst = std::max(r.worst, std::abs(m.value - free_m(z)));
    ++r.samples;
  }
  finish(r, t0);
  if (not_herglotz) {
    r.pass = false;
    r.detail = std::to_string(not_herglotz) + " values with Im m <= 0";
  }
  return r;
}

FamilyResult m_combination(const Options& opt) {
  const auto t0 = Clock::now();
  auto r = begin("m-combination", 1e-5);
  std::mt19937_64 gen(opt.seed + 4);
  std::uniform_real_distribution<double> E(-2.5, 2.5);
  const std::size_t count = count_or(opt, 20);
  std::size_t not_herglotz = 0;
  while (r.samples < count && r.redrawn < 10 * count) {
    const auto op = random_operator(gen, 2.0);
    const cplx z{E(gen), 1e-2};
    try {
      const auto f = spectral::full_line_M(op, z);
      const auto d = spectral::direct_resolvent(op, z);
      for (cplx v : {f.M, f.M0, f.M1, f.m_plus, d.M, d.M0, d.M1})
        if (!(v.imag() > 0.0)) ++not_herglotz;
      r.worst = std::max({r.worst, std::abs(f.M - d.M) / std::max(1.0, std::abs(d.M)),
                          std::abs(f.M0 - d.M0) / std::max(1.0, std::abs(d.M0)),
                          std::abs(f.M1 - d.M1) / std::max(1.0, std::abs(d.M1))});
      ++r.samples;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Cancellation) throw;
      ++r.redrawn;
    }
  }
  finish(r, t0);
  if (not_herglotz) {
    r.pass = false;
    r.detail = std::to_string(not_herglotz) + " values with Im <= 0";
  }
  return r;
}

FamilyResult parseval(const Options& opt) {
  const auto t0 = Clock::now();
  auto r = begin("parseval", 1e-10);
  std::mt19937_64 gen(opt.seed + 5);
  std::uniform_int_distribution<std::int64_t> N(50, 300), B(1, 4);
  const std::size_t count = count_or(opt, 10);
  for (std::size_t k = 0; k < count; ++k) {
    const auto op = random_operator(gen, 8.0);
    const auto mu = spectral::empirical_measure(op, N(gen), B(gen));
    r.worst = std::max(r.worst, std::fabs(mu.total_mass() - 2.0));
    ++r.samples;
  }
  finish(r, t0);
  return r;
}

std::vector<std::string> family_names() {
  return {"wronskian", "expansion", "gram", "m-free", "m-combination", "parseval"};
}

std::vector<FamilyResult> run(std::string_view filter, const Options& opt) {
  using Fn = FamilyResult (*)(const Options&);
  const std::pair<const char*, Fn> table[] = {
      {"wronskian", wronskian}, {"expansion", expansion},         {"gram", gram},
      {"m-free", m_free},       {"m-combination", m_combination}, {"parseval", parseval}};
  std::vector<FamilyResult> out;
  for (const auto& [name, fn] : table)
    if (filter.empty() || std::string_view(name).find(filter) != std::string_view::npos)
      out.push_back(fn(opt));
  return out;
}

std::string summary_line(const FamilyResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-14s %s  worst %.3e  tol %.0e  samples %zu  %.2fs",
                r.name.c_str(), r.pass ? "pass" : "FAIL", r.worst, r.tolerance, r.samples,
                r.seconds);
  std::string s = buf;
  if (r.redrawn) s += "  redrawn " + std::to_string(r.redrawn);
  if (!r.detail.empty()) s += "  (" + r.detail + ")";
  return s;
}

}  // namespace qpspec::selftest
