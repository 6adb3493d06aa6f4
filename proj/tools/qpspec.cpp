#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qpspec/arithmetic.hpp"
#include "qpspec/config.hpp"
#include "qpspec/dimension.hpp"
#include "qpspec/dynamics.hpp"
#include "qpspec/error.hpp"
#include "qpspec/selftest.hpp"
#include "qpspec/spectral.hpp"
#include "qpspec/verify.hpp"

using namespace qpspec;
using nlohmann::json;

namespace {

constexpr int kOk = 0, kCheckFailure = 1, kConfigError = 2, kNumericError = 3;

// Operator setup shared by the subcommands: either --config or the individual flags.
struct Setup {
  std::string config_path;
  std::string potential = "sawtooth:1";
  std::string alpha = "golden";
  std::size_t depth = 40;
  unsigned precision_bits = arithmetic::kDefaultPrecisionBits;
  double x = 0.0;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--config", config_path, "experiment config (JSON)");
    app->add_option("--potential", potential,
                    "sawtooth:<g> | cosine:<l> | tangent:<l> | free | table:<csv> | JSON");
    app->add_option("--alpha", alpha, "golden | sqrt2 | pi | liouville:<beta>:<terms> | decimal");
    app->add_option("--depth", depth, "continued-fraction depth");
    app->add_option("--precision-bits", precision_bits);
    app->add_option("--x", x, "phase");
    app->add_option("--seed", seed);
  }

  // Resolved operator plus the JSON whose hash labels the output.
  struct Resolved {
    model::PotentialSpec spec;
    arithmetic::CFExpansion cf;
    double x;
    std::uint64_t seed;
    json id;
  };

  Resolved resolve(const std::string& command, json extra) const {
    Resolved r;
    if (!config_path.empty()) {
      const auto cfg = config::load(config_path);
      r.spec = cfg.potential;
      r.cf = arithmetic::parse_frequency(cfg.frequency, cfg.depth, cfg.precision_bits);
      r.x = cfg.x;
      r.seed = cfg.seed;
      r.id = {{"config", cfg.hash}};
    } else {
      r.spec = config::parse_potential(potential);
      r.cf = arithmetic::parse_frequency(alpha, depth, precision_bits);
      r.x = x;
      r.seed = seed;
      r.id = {{"potential", model::to_json(r.spec)},
              {"frequency", alpha},
              {"depth", depth},
              {"precision_bits", precision_bits},
              {"x", x},
              {"seed", seed}};
    }
    r.id["command"] = command;
    r.id["options"] = std::move(extra);
    return r;
  }
};

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 1) return {lo};
  std::vector<double> v(count);
  for (std::size_t k = 0; k < count; ++k)
    v[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  return v;
}

void header(const json& id) { std::cout << config::header_line(config::hash_of(id)) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasiperiodic Schrodinger operator toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", config::kVersion);
  std::cout.precision(17);

  // cf
  auto* cf_cmd = app.add_subcommand("cf", "continued fraction table");
  std::string cf_alpha = "golden";
  std::size_t cf_depth = 20;
  unsigned cf_bits = arithmetic::kDefaultPrecisionBits;
  cf_cmd->add_option("--alpha", cf_alpha);
  cf_cmd->add_option("--depth", cf_depth);
  cf_cmd->add_option("--precision-bits", cf_bits);

  // freq-build
  auto* fb_cmd = app.add_subcommand("freq-build", "construct a Liouville frequency");
  double fb_beta = 1.0;
  std::size_t fb_terms = 8;
  std::vector<std::int64_t> fb_seed;
  unsigned fb_bits = arithmetic::kDefaultPrecisionBits;
  fb_cmd->add_option("--beta", fb_beta)->required();
  fb_cmd->add_option("--terms", fb_terms);
  fb_cmd->add_option("--seed-quotients", fb_seed);
  fb_cmd->add_option("--precision-bits", fb_bits);

  // lyapunov
  auto* ly_cmd = app.add_subcommand("lyapunov", "Lyapunov exponent over an energy grid");
  Setup ly;
  ly.add(ly_cmd);
  std::vector<double> ly_range{-3.0, 3.0};
  std::size_t ly_count = 61;
  std::int64_t ly_n = 10000;
  std::size_t ly_phases = 32;
  ly_cmd->add_option("--E-range", ly_range)->expected(2);
  ly_cmd->add_option("--count", ly_count);
  ly_cmd->add_option("--n", ly_n);
  ly_cmd->add_option("--phases", ly_phases);

  // mfun
  auto* mf_cmd = app.add_subcommand("mfun", "full-line Borel transform M(E + i eps)");
  Setup mf;
  mf.add(mf_cmd);
  std::vector<double> mf_range{-2.0, 2.0};
  std::size_t mf_count = 21;
  std::vector<double> mf_eps{1e-1, 1e-2, 1e-3};
  double mf_tol = 1e-10;
  mf_cmd->add_option("--E-range", mf_range)->expected(2);
  mf_cmd->add_option("--count", mf_count);
  mf_cmd->add_option("--eps", mf_eps);
  mf_cmd->add_option("--tol", mf_tol);

  // measure
  auto* me_cmd = app.add_subcommand("measure", "finite-volume spectral measure");
  Setup me;
  me.add(me_cmd);
  std::int64_t me_N = 500, me_bc = 1;
  me_cmd->add_option("--N", me_N);
  me_cmd->add_option("--bc-average", me_bc);

  // dims
  auto* di_cmd = app.add_subcommand("dims", "Renyi and packing dimension estimates");
  Setup di;
  di.add(di_cmd);
  std::int64_t di_N = 2000, di_bc = 4;
  double di_q = 2.0, di_eps_hi = 1e-2;
  std::size_t di_eps_count = 10, di_samples = 200;
  bool di_json = false;
  di_cmd->add_option("--N", di_N);
  di_cmd->add_option("--bc-average", di_bc);
  di_cmd->add_option("--q", di_q);
  di_cmd->add_option("--eps-hi", di_eps_hi);
  di_cmd->add_option("--eps-count", di_eps_count);
  di_cmd->add_option("--samples", di_samples);
  di_cmd->add_flag("--json", di_json, "print the reports as JSON");

  // verify
  auto* ve_cmd = app.add_subcommand("verify", "run one check");
  Setup ve;
  ve.add(ve_cmd);
  std::string ve_check;
  std::optional<double> ve_E;
  std::vector<std::string> ve_params;
  ve_cmd->add_option("check", ve_check, "check name")
      ->required()
      ->check(CLI::IsMember(config::check_names()));
  ve_cmd->add_option("--E", ve_E, "energy (default: the --config energies)");
  ve_cmd->add_option("--param", ve_params, "check parameter key=value (JSON value)");

  // scan
  auto* sc_cmd = app.add_subcommand("scan", "transition table over the config energy grid");
  std::string sc_config;
  sc_cmd->add_option("--config", sc_config)->required();

  // selftest
  auto* st_cmd = app.add_subcommand("selftest", "identity suite");
  std::string st_filter;
  selftest::Options st_opt;
  st_cmd->add_option("--filter", st_filter, "run families whose name contains this");
  st_cmd->add_option("--samples", st_opt.samples);
  st_cmd->add_option("--seed", st_opt.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*cf_cmd) {
      const auto cf = arithmetic::parse_frequency(cf_alpha, cf_depth, cf_bits);
      header({{"command", "cf"}, {"alpha", cf_alpha}, {"depth", cf_depth}, {"precision_bits", cf_bits}});
      std::cout << "n,a_n,p_n,q_n,log_ratio\n";
      for (std::size_t n = 1; n < cf.convergents.size(); ++n) {
        std::cout << n << ',' << cf.partial_quotients[n - 1] << ',' << cf.p(n) << ',' << cf.q(n)
                  << ',';
        if (n < cf.beta_sequence.size()) std::cout << cf.beta_sequence[n];
        std::cout << '\n';
      }
      return kOk;
    }

    if (*fb_cmd) {
      const auto cf = arithmetic::build_liouville_frequency(fb_beta, fb_terms, fb_seed, fb_bits);
      const json id{{"command", "freq-build"}, {"beta", fb_beta}, {"terms", fb_terms},
                    {"seed_quotients", fb_seed}, {"precision_bits", fb_bits}};
      json out = arithmetic::to_json(cf);
      out["beta_hat"] = arithmetic::beta_estimate(cf).beta_hat;
      out["config_hash"] = config::hash_of(id);
      out["qpspec"] = config::kVersion;
      std::cout << out.dump(2) << '\n';
      return kOk;
    }

    if (*ly_cmd) {
      const auto r = ly.resolve("lyapunov", {{"E_range", ly_range}, {"count", ly_count},
                                             {"n", ly_n}, {"phases", ly_phases}});
      const model::OperatorPoint op(r.spec, r.cf, r.x);
      const auto Es = linspace(ly_range[0], ly_range[1], ly_count);
      const auto rows = dynamics::lyapunov_sweep(op, Es, ly_n, ly_phases, r.seed);
      header(r.id);
      std::cout << "E,L_hat,stderr,n,phases\n";
      bool negative = false;
      for (const auto& row : rows) {
        std::cout << row.energy << ',' << row.L_hat << ',' << row.stderr_ << ',' << row.n << ','
                  << row.phases << '\n';
        negative |= !(row.L_hat >= 0.0);
      }
      if (negative) {
        std::cerr << "error: negative Lyapunov estimate\n";
        return kNumericError;
      }
      return kOk;
    }

    if (*mf_cmd) {
      const auto r = mf.resolve("mfun", {{"E_range", mf_range}, {"count", mf_count},
                                         {"eps", mf_eps}, {"tol", mf_tol}});
      const model::OperatorPoint op(r.spec, r.cf, r.x);
      header(r.id);
      std::cout << "E,eps,ReM,ImM,N,converged\n";
      int code = kOk;
      for (double E : linspace(mf_range[0], mf_range[1], mf_count))
        for (double eps : mf_eps) {
          std::cout << E << ',' << eps << ',';
          try {
            const auto M = spectral::full_line_M(op, {E, eps}, mf_tol);
            std::cout << M.M.real() << ',' << M.M.imag() << ',' << M.truncation_N << ",1\n";
          } catch (const Error& e) {
            std::cout << "nan,nan,0,0\n";
            std::cerr << "E=" << E << " eps=" << eps << ": " << e.what() << '\n';
            code = kNumericError;
          }
        }
      return code;
    }

    if (*me_cmd) {
      const auto r = me.resolve("measure", {{"N", me_N}, {"bc_average", me_bc}});
      const model::OperatorPoint op(r.spec, r.cf, r.x);
      const auto mu = spectral::empirical_measure(op, me_N, me_bc);
      header(r.id);
      spectral::write_csv(std::cout, mu);
      return kOk;
    }

    if (*di_cmd) {
      const auto r = di.resolve("dims", {{"N", di_N}, {"bc_average", di_bc}, {"q", di_q},
                                         {"eps_hi", di_eps_hi}, {"eps_count", di_eps_count},
                                         {"samples", di_samples}});
      const model::OperatorPoint op(r.spec, r.cf, r.x);
      const auto mu = spectral::empirical_measure(op, di_N, di_bc);
      const auto grid = dimension::default_grid(di_eps_hi, di_eps_count);
      const auto renyi = dimension::renyi_dimension(mu, di_q, grid);
      const auto points = dimension::sample_support(mu, di_samples);
      const auto packing = dimension::packing_dim_estimate(mu, points, grid);
      if (di_json) {
        std::cout << json{{"config_hash", config::hash_of(r.id)},
                          {"qpspec", config::kVersion},
                          {"renyi", dimension::to_json(renyi)},
                          {"packing", dimension::to_json(packing)}}
                         .dump(2)
                  << '\n';
        return kOk;
      }
      header(r.id);
      std::cout << "# " << renyi.target << " estimate " << renyi.estimate << '\n';
      dimension::write_csv(std::cout, renyi);
      std::cout << "# " << packing.target << " estimate " << packing.estimate << '\n';
      dimension::write_csv(std::cout, packing);
      return kOk;
    }

    if (*ve_cmd) {
      json doc;
      if (!ve.config_path.empty()) {
        doc = config::load(ve.config_path).canonical;
      } else {
        doc = {{"frequency", ve.alpha},
               {"depth", ve.depth},
               {"precision_bits", ve.precision_bits},
               {"potential", model::to_json(config::parse_potential(ve.potential))},
               {"x", ve.x},
               {"seed", ve.seed}};
      }
      json check{{"name", ve_check}};
      for (const auto& kv : ve_params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw Error(ErrorKind::ConfigError, "--param expects key=value, got '" + kv + "'");
        const std::string value = kv.substr(eq + 1);
        check[kv.substr(0, eq)] = json::accept(value) ? json::parse(value) : json(value);
      }
      doc["checks"] = json::array({check});
      doc.erase("scan");
      if (ve_E) {
        doc.erase("energy_grid");
        doc["energy"] = *ve_E;
      }
      return config::run_checks(config::parse(doc), std::cout).exit_code;
    }

    if (*sc_cmd) {
      auto cfg = config::load(sc_config);
      if (!cfg.scan) {
        json doc = cfg.canonical;
        doc["scan"] = json::object();
        cfg = config::parse(doc);
      }
      const auto s = config::run(cfg, std::cerr);
      std::ifstream table(std::filesystem::path(cfg.output_dir) / "scan.csv");
      std::cout << table.rdbuf();
      return s.exit_code;
    }

    if (*st_cmd) {
      const auto results = selftest::run(st_filter, st_opt);
      if (results.empty()) {
        std::cerr << "no family matches '" << st_filter << "'\n";
        return kConfigError;
      }
      header({{"command", "selftest"}, {"filter", st_filter}, {"samples", st_opt.samples},
              {"seed", st_opt.seed}});
      bool ok = true;
      for (const auto& r : results) {
        std::cout << selftest::summary_line(r) << '\n';
        ok &= r.pass;
      }
      std::cout << (ok ? "all families pass" : "selftest FAILED") << '\n';
      return ok ? kOk : kCheckFailure;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::InvalidArgument
               ? kConfigError
               : kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumericError;
  }
  return kOk;
}
