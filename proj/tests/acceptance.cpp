// Acceptance criteria: one line per criterion, exit status 0 iff all pass.
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "qpspec/arithmetic.hpp"
#include "qpspec/dimension.hpp"
#include "qpspec/dynamics.hpp"
#include "qpspec/error.hpp"
#include "qpspec/selftest.hpp"
#include "qpspec/spectral.hpp"
#include "qpspec/subordinacy.hpp"
#include "qpspec/verify.hpp"

using namespace qpspec;
using model::PotentialSpec;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const arithmetic::CFExpansion& golden() {
  static const auto cf = arithmetic::parse_frequency("golden", 30);
  return cf;
}

PotentialSpec saw(double g) { return PotentialSpec(model::Sawtooth{g, -g / 2}); }

Outcome identities() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string d;
  for (auto fn : {selftest::wronskian, selftest::expansion, selftest::gram}) {
    const auto r = fn({});
    ok &= r.pass;
    d += fmt("%s %.1e/%.0e n=%zu; ", r.name.c_str(), r.worst, r.tolerance, r.samples);
  }
  const double t = seconds_since(t0);
  return {ok && t < 60.0, d + fmt("%.1fs (limit 60s)", t)};
}

Outcome m_functions() {
  const auto f = selftest::m_free({});
  const auto c = selftest::m_combination({});
  std::string d = fmt("free m %.1e/1e-08 at %zu points; combination %.1e/1e-05 at %zu points",
                      f.worst, f.samples, c.worst, c.samples);
  if (!f.detail.empty()) d += "; " + f.detail;
  if (!c.detail.empty()) d += "; " + c.detail;
  return {f.pass && c.pass && f.samples == 50 && c.samples == 20, d};
}

Outcome lyapunov_calibration() {
  const auto t0 = Clock::now();
  const auto free = PotentialSpec::free();
  const double l0 = dynamics::lyapunov(free, golden(), 0.0, 10000, 64).L_hat;
  const double l3 = dynamics::lyapunov(free, golden(), 3.0, 10000, 64).L_hat;
  const double exact = std::log((3.0 + std::sqrt(5.0)) / 2.0);
  const double t = seconds_since(t0);
  const bool ok = std::fabs(l0) <= 0.01 && std::fabs(l3 - exact) <= 0.005 && t < 30.0;
  return {ok, fmt("L(0) = %.2e (|.| <= 0.01), L(3) = %.6f vs %.6f (+-0.005), %.1fs (limit 30s)",
                  l0, l3, exact, t)};
}

Outcome dimension_calibration() {
  const auto t0 = Clock::now();
  const spectral::AtomicMeasure point({{0.5, 1.0}});
  std::vector<spectral::Atom> atoms(1 << 20);
  for (std::size_t i = 0; i < atoms.size(); ++i)
    atoms[i] = {(static_cast<double>(i) + 0.5) / static_cast<double>(atoms.size()),
                1.0 / static_cast<double>(atoms.size())};
  const spectral::AtomicMeasure uniform(std::move(atoms));

  const auto renyi_grid = dimension::default_grid(0.1, 12);
  const auto packing_grid = spectral::geometric_grid(1e-2, 1e-4, 9);
  const double pp = dimension::packing_dim_estimate(point, dimension::sample_support(point, 10),
                                                    packing_grid)
                        .estimate;
  const double pr = dimension::renyi_dimension(point, 2.0, renyi_grid).estimate;
  const double up = dimension::packing_dim_estimate(uniform, dimension::sample_support(uniform, 200),
                                                    packing_grid)
                        .estimate;
  const double ur = dimension::renyi_dimension(uniform, 2.0, renyi_grid).estimate;
  const double t = seconds_since(t0);
  const bool ok = pp < 0.1 && pr < 0.1 && up > 0.9 && std::fabs(ur - 1.0 / 3.0) <= 0.05 && t < 20.0;
  return {ok, fmt("point: packing %.3f, renyi(2) %.3f (< 0.1); uniform: packing %.3f (> 0.9), "
                  "renyi(2) %.4f (1/3 +- 0.05); %.1fs (limit 20s)",
                  pp + 0.0, pr + 0.0, up, ur, t)};
}

Outcome subordinacy() {
  const auto eps = spectral::geometric_grid(1e-1, 1e-4, 7);
  const double theta = std::numbers::pi / 4;
  double worst = 0.0;
  std::size_t count = 0, passed = 0;
  auto run = [&](const model::OperatorPoint& op, const std::vector<double>& Es) {
    for (double E : Es) {
      const auto r = dynamics::subordinacy_check(op, E, theta, eps, 100.0);
      worst = std::max(worst, r.parameters["C_fit"].get<double>());
      passed += r.pass();
      ++count;
    }
  };
  std::vector<double> free_E(10);
  for (std::size_t k = 0; k < 10; ++k) free_E[k] = -1.8 + 0.4 * static_cast<double>(k);
  run(model::OperatorPoint(PotentialSpec::free(), golden(), 0.1), free_E);
  // energies carrying spectral weight: mu-quantiles of the finite-volume measure
  const model::OperatorPoint sop(saw(1.0), golden(), 0.1);
  const auto mu = spectral::empirical_measure(sop, 1000, 1);
  run(sop, dimension::sample_support(mu, 10));
  return {passed == count && count == 20,
          fmt("%zu/%zu energies with C_fit <= 100 over eps in [1e-4, 1e-1]; worst C_fit %.2f",
              passed, count, worst)};
}

Outcome transition() {
  const auto t0 = Clock::now();
  const auto cf = arithmetic::build_liouville_frequency(1.0, 8);
  verify::ScanConfig cfg;
  cfg.N = 4000;
  cfg.bc_average = 4;

  const verify::Context hi(saw(20.0), cf, 0.1);
  const auto mu_hi = spectral::empirical_measure(hi.op, cfg.N, cfg.bc_average);
  const auto a = verify::check_atomic_regime(hi, mu_hi, 1.2, 2.0, 0.15, 60, cfg);

  const verify::Context mid(saw(8.3), cf, 0.1);
  const auto mu_mid = spectral::empirical_measure(mid.op, cfg.N, cfg.bc_average);
  const auto b = verify::check_eta_divergence(mid, mu_mid, 0.55, 0.9, 0.8, 60, cfg);
  const double t = seconds_since(t0);
  const bool ok = a.pass() && b.pass() && t < 600.0;
  return {ok, fmt("beta_hat %.4f; L in [1.2, 2]: %s, %s; L in (0.55, 0.9) beta: %s, %s; %.0fs "
                  "(limit 600s)",
                  hi.beta(), std::string(to_string(a.status)).c_str(), a.notes.c_str(),
                  std::string(to_string(b.status)).c_str(), b.notes.c_str(), t)};
}

Outcome honesty() {
  std::size_t runs = 0, passes = 0, skipped = 0, errors = 0;
  const auto liouville = arithmetic::build_liouville_frequency(1.0, 8);
  // with the floor at 0 the checks run on the raw, slightly positive estimate
  for (double floor : {0.01, 0.0})
  for (const auto* cf : {&golden(), &liouville}) {
    verify::Context ctx(PotentialSpec::free(), *cf, 0.1);
    ctx.lyapunov_floor = floor;
    const auto p = verify::transition_params(0.5, std::max(ctx.beta(), 0.05));
    for (double E : {-1.9, -1.2, -0.5, 0.0, 0.3, 1.0, 1.7}) {
      for (double delta : {verify::kDefaultDelta, 0.0}) {
        for (std::size_t n : {2, 3, 6, 9}) {
          if (n + 1 >= cf->convergents.size()) continue;
          const std::vector<std::function<VerificationReport()>> checks = {
              [&] { return verify::check_diophantine_regularity(ctx, E, n, delta); },
              [&] { return verify::check_nonresonant_regularity(ctx, E, n, 0.1, delta); },
              [&] { return verify::check_block_decay(ctx, E, n, 1, delta); },
              [&] { return verify::check_resonant_decay(ctx, E, n, p, delta); },
          };
          for (const auto& c : checks) {
            ++runs;
            try {
              const auto r = c();
              passes += r.pass();
              skipped += r.status == CheckStatus::Skipped;
            } catch (const Error&) {
              ++errors;
            }
          }
        }
      }
    }
  }
  return {passes == 0, fmt("%zu decay-type checks on the free operator: %zu pass, %zu skipped, "
                           "%zu fail, %zu refused with an error",
                           runs, passes, skipped, runs - passes - skipped - errors, errors)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"identity suite", identities},
      {"m-function suite", m_functions},
      {"Lyapunov calibration", lyapunov_calibration},
      {"dimension calibration", dimension_calibration},
      {"subordinacy bound", subordinacy},
      {"transition consistency", transition},
      {"harness honesty", honesty},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("[%s] %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
