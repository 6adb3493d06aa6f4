#include "qpspec/config.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "qpspec/arithmetic.hpp"
#include "qpspec/error.hpp"
#include "qpspec/spectral.hpp"
#include "qpspec/subordinacy.hpp"

namespace qpspec::config {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigError, path + ": " + what);
}

void only_keys(const json& obj, const std::string& path, const std::vector<std::string>& keys) {
  if (!obj.is_object()) bad(path, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      bad(path.empty() ? key : path + "." + key, "unknown key");
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double number(const json& obj, const std::string& path, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) bad(join(path, key), "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) bad(join(path, key), "expected a finite number");
  return d;
}

std::int64_t integer(const json& obj, const std::string& path, const char* key,
                     std::int64_t fallback, std::int64_t min) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) bad(join(path, key), "expected an integer");
  const auto i = v.get<std::int64_t>();
  if (i < min) bad(join(path, key), "must be at least " + std::to_string(min));
  return i;
}

struct CheckSchema {
  const char* name;
  std::vector<std::string> keys;
  std::vector<std::string> required;
  // energy-independent checks run once on the measure
  bool global;
};

const std::vector<CheckSchema>& schemas() {
  static const std::vector<CheckSchema> s = {
      {"diophantine_regularity", {"name", "n", "delta", "C"}, {"n"}, false},
      {"nonresonant_regularity", {"name", "n", "tau", "delta", "C"}, {"n"}, false},
      {"resonant_decay",
       {"name", "n", "delta", "tau", "sigma", "t2", "energy_tol", "snap"},
       {"n"},
       false},
      {"omega_growth", {"name", "L_grid", "eps_slack", "sigma", "t2"}, {}, false},
      {"block_decay", {"name", "n", "j", "delta"}, {"n"}, false},
      {"m_lower_bound", {"name", "t", "eps_hi", "eps_lo", "eps_count"}, {"t"}, false},
      {"subordinacy", {"name", "theta", "eps_hi", "eps_lo", "eps_count", "C_max"}, {}, false},
      {"atomic_regime", {"name", "L_lo", "L_hi", "threshold", "samples"}, {"L_lo", "L_hi"}, true},
      {"eta_divergence", {"name", "r_lo", "r_hi", "fraction", "samples"}, {}, true},
  };
  return s;
}

const CheckSchema& schema_for(const std::string& name) {
  for (const auto& s : schemas())
    if (name == s.name) return s;
  throw Error(ErrorKind::ConfigError, "unknown check '" + name + "'");
}

CheckSpec parse_check(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  if (!j.contains("name") || !j.at("name").is_string()) bad(join(path, "name"), "expected a string");
  CheckSpec c;
  c.name = j.at("name").get<std::string>();
  const CheckSchema* schema = nullptr;
  for (const auto& s : schemas())
    if (c.name == s.name) schema = &s;
  if (!schema) bad(join(path, "name"), "unknown check '" + c.name + "'");
  only_keys(j, path, schema->keys);
  for (const auto& r : schema->required)
    if (!j.contains(r)) bad(join(path, r), "required");
  for (const auto& [key, value] : j.items()) {
    if (key == "name") continue;
    const std::string p = join(path, key);
    if (key == "snap") {
      if (!value.is_boolean()) bad(p, "expected a boolean");
    } else if (key == "L_grid") {
      if (!value.is_array() || value.size() < 3) bad(p, "expected at least three scales");
      for (const auto& v : value)
        if (!v.is_number() || !(v.get<double>() > 0.0)) bad(p, "expected positive numbers");
    } else if (key == "n" || key == "j" || key == "eps_count" || key == "samples") {
      integer(j, path, key.c_str(), 0, key == "j" ? std::numeric_limits<std::int64_t>::min() : 1);
    } else {
      number(j, path, key.c_str(), 0.0);
    }
    if (key != "name") c.params[key] = value;
  }
  return c;
}

std::string frequency_string(const json& j, const std::string& path) {
  if (j.is_string()) return j.get<std::string>();
  only_keys(j, path, {"kind", "beta", "terms"});
  if (j.value("kind", "") != "liouville") bad(join(path, "kind"), "expected \"liouville\"");
  const double beta = number(j, path, "beta", 1.0);
  const auto terms = integer(j, path, "terms", 8, 1);
  std::ostringstream s;
  s.precision(17);
  s << "liouville:" << beta << ":" << terms;
  return s.str();
}

json scan_to_json(const verify::ScanConfig& s) {
  return {{"N", s.N},
          {"bc_average", s.bc_average},
          {"eps_hi", s.eps_hi},
          {"eps_count", s.eps_count},
          {"eta_offset", s.eta_offset}};
}

verify::ScanConfig parse_scan(const json& j) {
  only_keys(j, "scan", {"N", "bc_average", "eps_hi", "eps_count", "eta_offset"});
  verify::ScanConfig s;
  s.N = integer(j, "scan", "N", s.N, 1);
  s.bc_average = integer(j, "scan", "bc_average", s.bc_average, 1);
  s.eps_hi = number(j, "scan", "eps_hi", s.eps_hi);
  s.eps_count = static_cast<std::size_t>(integer(j, "scan", "eps_count", 10, 2));
  s.eta_offset = number(j, "scan", "eta_offset", s.eta_offset);
  if (!(s.eps_hi > 0.0 && s.eps_hi <= 1.0)) bad("scan.eps_hi", "must lie in (0, 1]");
  return s;
}

// Line of a byte offset in the file text, 1-based.
std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

}  // namespace

std::vector<double> EnergyGrid::points() const {
  if (count == 1) return {lo};
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  return out;
}

std::vector<double> ExperimentConfig::energies() const {
  if (energy) return {*energy};
  if (energy_grid) return energy_grid->points();
  return {};
}

const std::vector<std::string>& check_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& s : schemas()) v.emplace_back(s.name);
    return v;
  }();
  return names;
}

model::PotentialSpec parse_potential(const std::string& text) {
  if (!text.empty() && text.front() == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ConfigError, std::string("potential: ") + e.what());
    }
    return model::potential_from_json(j);
  }
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  if (kind == "free" && arg.empty()) return model::PotentialSpec::free();
  if (kind == "table") return model::potential_from_json({{"kind", "table"}, {"csv", arg}});
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(arg, &used);
    if (used != arg.size()) throw std::invalid_argument(arg);
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigError, "potential: expected <kind>:<number>, got '" + text + "'");
  }
  if (kind == "sawtooth") return model::PotentialSpec(model::Sawtooth{v, -0.5 * v});
  if (kind == "cosine") return model::PotentialSpec(model::Cosine{v});
  if (kind == "tangent") return model::PotentialSpec(model::TangentMonotone{v});
  throw Error(ErrorKind::ConfigError, "potential: unknown kind '" + kind + "'");
}

ExperimentConfig parse(const json& doc) {
  only_keys(doc, "", {"frequency", "depth", "potential", "x", "energy", "energy_grid", "checks",
                      "scan", "output_dir", "seed", "precision_bits", "workers", "lyapunov"});
  ExperimentConfig c;
  if (doc.contains("frequency")) c.frequency = frequency_string(doc.at("frequency"), "frequency");
  c.depth = static_cast<std::size_t>(integer(doc, "", "depth", 40, 1));
  c.precision_bits = static_cast<unsigned>(integer(doc, "", "precision_bits", 256, 64));
  if (!doc.contains("potential")) bad("potential", "required");
  {
    const auto& p = doc.at("potential");
    c.potential = p.is_string() ? parse_potential(p.get<std::string>()) : model::potential_from_json(p);
  }
  c.x = number(doc, "", "x", 0.0);
  if (doc.contains("energy")) c.energy = number(doc, "", "energy", 0.0);
  if (doc.contains("energy_grid")) {
    const auto& g = doc.at("energy_grid");
    only_keys(g, "energy_grid", {"range", "count"});
    if (!g.contains("range") || !g.at("range").is_array() || g.at("range").size() != 2 ||
        !g.at("range")[0].is_number() || !g.at("range")[1].is_number())
      bad("energy_grid.range", "expected [lo, hi]");
    EnergyGrid eg;
    eg.lo = g.at("range")[0].get<double>();
    eg.hi = g.at("range")[1].get<double>();
    eg.count = static_cast<std::size_t>(integer(g, "energy_grid", "count", 1, 1));
    if (eg.hi < eg.lo) bad("energy_grid.range", "hi below lo");
    c.energy_grid = eg;
  }
  if (c.energy && c.energy_grid) bad("energy", "give either energy or energy_grid");
  if (doc.contains("checks")) {
    const auto& arr = doc.at("checks");
    if (!arr.is_array()) bad("checks", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i)
      c.checks.push_back(parse_check(arr[i], "checks[" + std::to_string(i) + "]"));
  }
  if (doc.contains("scan")) c.scan = parse_scan(doc.at("scan"));
  const bool needs_E = c.scan.has_value() ||
                       std::any_of(c.checks.begin(), c.checks.end(),
                                   [](const CheckSpec& k) { return !schema_for(k.name).global; });
  if (needs_E && !c.energy && !c.energy_grid) bad("energy_grid", "required by the requested checks");
  if (doc.contains("output_dir")) {
    if (!doc.at("output_dir").is_string()) bad("output_dir", "expected a string");
    c.output_dir = doc.at("output_dir").get<std::string>();
  }
  c.seed = static_cast<std::uint64_t>(integer(doc, "", "seed", 0, 0));
  c.workers = static_cast<int>(integer(doc, "", "workers", 0, 0));
  if (doc.contains("lyapunov")) {
    const auto& l = doc.at("lyapunov");
    only_keys(l, "lyapunov", {"n", "phases"});
    c.lyapunov_n = integer(l, "lyapunov", "n", c.lyapunov_n, 1);
    c.lyapunov_phases = static_cast<std::size_t>(integer(l, "lyapunov", "phases", 32, 32));
  }
  try {
    arithmetic::parse_frequency(c.frequency, c.depth, c.precision_bits);
  } catch (const Error& e) {
    bad("frequency", e.what());
  }

  json& k = c.canonical;
  k["frequency"] = c.frequency;
  k["depth"] = c.depth;
  k["potential"] = model::to_json(c.potential);
  k["x"] = c.x;
  if (c.energy) k["energy"] = *c.energy;
  if (c.energy_grid)
    k["energy_grid"] = {{"range", {c.energy_grid->lo, c.energy_grid->hi}},
                        {"count", c.energy_grid->count}};
  k["checks"] = json::array();
  for (const auto& chk : c.checks) {
    json e = chk.params;
    e["name"] = chk.name;
    k["checks"].push_back(e);
  }
  if (c.scan) k["scan"] = scan_to_json(*c.scan);
  k["output_dir"] = c.output_dir;
  k["seed"] = c.seed;
  k["precision_bits"] = c.precision_bits;
  k["workers"] = c.workers;
  k["lyapunov"] = {{"n", c.lyapunov_n}, {"phases", c.lyapunov_phases}};
  // output_dir and workers do not change results
  json hashed = k;
  hashed.erase("output_dir");
  hashed.erase("workers");
  c.hash = hash_of(hashed);
  return c;
}

ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, path + ": cannot open");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigError,
                path + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  try {
    return parse(doc);
  } catch (const Error& e) {
    std::string what = e.what();
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    if (what.rfind(prefix, 0) == 0) what.erase(0, prefix.size());
    throw Error(e.kind() == ErrorKind::InvalidArgument ? ErrorKind::ConfigError : e.kind(),
                path + ": " + what);
  }
}

std::string hash_of(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

std::string header_line(const std::string& hash) {
  return std::string("# qpspec ") + kVersion + " config " + hash;
}

namespace {

struct Outcome {
  json line;
  int kind = 0;  // 0 pass, 1 fail, 2 skipped, 3 numeric error, 4 argument error
};

Outcome from_report(const VerificationReport& r, std::optional<double> E) {
  Outcome o;
  o.line = to_json(r);
  if (E) o.line["E"] = *E;
  o.kind = r.status == CheckStatus::Pass ? 0 : r.status == CheckStatus::Fail ? 1 : 2;
  return o;
}

Outcome from_error(const std::string& name, std::optional<double> E, const Error& e) {
  Outcome o;
  o.line = {{"check", name}, {"status", "error"}, {"error", std::string(to_string(e.kind()))},
            {"message", e.what()}};
  if (E) o.line["E"] = *E;
  o.kind = e.kind() == ErrorKind::InvalidArgument || e.kind() == ErrorKind::ConfigError ? 4 : 3;
  return o;
}

std::vector<double> eps_grid(const json& p) {
  return spectral::geometric_grid(p.value("eps_hi", 0.1), p.value("eps_lo", 1e-4),
                                  p.value("eps_count", std::size_t{8}));
}

std::optional<double> opt_number(const json& p, const char* key) {
  if (!p.contains(key)) return std::nullopt;
  return p.at(key).get<double>();
}

VerificationReport run_at(const verify::Context& ctx, const CheckSpec& c, double E) {
  const json& p = c.params;
  const double delta = p.value("delta", verify::kDefaultDelta);
  const auto n = p.value("n", std::size_t{0});
  auto params = [&]() -> std::optional<verify::TransitionParams> {
    try {
      return verify::transition_params(ctx.lyapunov(E), ctx.beta(), p.value("sigma", 0.01),
                                       opt_number(p, "t2"));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  if (c.name == "diophantine_regularity")
    return verify::check_diophantine_regularity(ctx, E, n, delta, p.value("C", 4.0));
  if (c.name == "nonresonant_regularity")
    return verify::check_nonresonant_regularity(ctx, E, n, p.value("tau", 0.1), delta,
                                                p.value("C", 4.0));
  if (c.name == "resonant_decay") {
    const auto tp = params();
    if (!tp) return VerificationReport::skipped(c.name, p, "no admissible t1 < t2 at this L, beta");
    const double E_use = p.value("snap", true) ? verify::nearest_block_eigenvalue(ctx, n, *tp, E) : E;
    return verify::check_resonant_decay(ctx, E_use, n, *tp, delta, p.value("tau", 0.1),
                                        p.value("energy_tol", 1e-8));
  }
  if (c.name == "omega_growth") {
    const auto tp = params();
    if (!tp) return VerificationReport::skipped(c.name, p, "no admissible t1 < t2 at this L, beta");
    const auto grid =
        p.value("L_grid", std::vector<double>{4, 8, 16, 32, 64, 128, 256, 512});
    return verify::check_omega_growth(ctx, E, grid, *tp, p.value("eps_slack", 0.1));
  }
  if (c.name == "block_decay")
    return verify::check_block_decay(ctx, E, n, p.value("j", std::int64_t{1}), delta);
  if (c.name == "m_lower_bound")
    return verify::check_m_lower_bound(ctx, E, p.at("t").get<double>(), eps_grid(p));
  if (c.name == "subordinacy")
    return dynamics::subordinacy_check(ctx.op, E, p.value("theta", std::numbers::pi / 4),
                                       eps_grid(p), p.value("C_max", 100.0));
  throw Error(ErrorKind::ConfigError, "unknown check '" + c.name + "'");
}

VerificationReport run_global(const verify::Context& ctx, const spectral::AtomicMeasure& mu,
                              const verify::ScanConfig& scan, const CheckSpec& c) {
  const json& p = c.params;
  const auto samples = p.value("samples", std::size_t{60});
  if (c.name == "atomic_regime")
    return verify::check_atomic_regime(ctx, mu, p.at("L_lo").get<double>(),
                                       p.at("L_hi").get<double>(), p.value("threshold", 0.15),
                                       samples, scan);
  return verify::check_eta_divergence(ctx, mu, p.value("r_lo", 0.55), p.value("r_hi", 0.9),
                                      p.value("fraction", 0.8), samples, scan);
}

}  // namespace

namespace {

verify::Context make_context(const ExperimentConfig& cfg) {
  verify::Context ctx(cfg.potential,
                      arithmetic::parse_frequency(cfg.frequency, cfg.depth, cfg.precision_bits), cfg.x);
  ctx.seed = cfg.seed;
  ctx.lyapunov_n = cfg.lyapunov_n;
  ctx.lyapunov_phases = cfg.lyapunov_phases;
  return ctx;
}

RunSummary checks_on(const ExperimentConfig& cfg, const verify::Context& ctx,
                     std::optional<spectral::AtomicMeasure>& mu, std::ostream& reports) {
  if (cfg.workers > 0) omp_set_num_threads(cfg.workers);
  const auto energies = cfg.energies();
  const verify::ScanConfig scan = cfg.scan.value_or(verify::ScanConfig{});

  std::vector<const CheckSpec*> local, global;
  for (const auto& c : cfg.checks) (schema_for(c.name).global ? global : local).push_back(&c);

  const std::size_t tasks = local.size() * energies.size();
  std::vector<Outcome> outcomes(tasks);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t t = 0; t < tasks; ++t) {
    const CheckSpec& c = *local[t / energies.size()];
    const double E = energies[t % energies.size()];
    try {
      outcomes[t] = from_report(run_at(ctx, c, E), E);
    } catch (const Error& e) {
      outcomes[t] = from_error(c.name, E, e);
    }
  }

  if ((!global.empty() || cfg.scan) && !mu)
    mu = spectral::empirical_measure(ctx.op, scan.N, scan.bc_average);
  for (const auto* c : global) {
    try {
      outcomes.push_back(from_report(run_global(ctx, *mu, scan, *c), std::nullopt));
    } catch (const Error& e) {
      outcomes.push_back(from_error(c->name, std::nullopt, e));
    }
  }

  RunSummary s;
  bool arg_error = false;
  reports << json{{"qpspec", kVersion}, {"config_hash", cfg.hash}, {"config", cfg.canonical}}.dump()
          << '\n';
  for (const auto& o : outcomes) {
    reports << o.line.dump() << '\n';
    switch (o.kind) {
      case 0: ++s.passed; break;
      case 1: ++s.failed; break;
      case 2: ++s.skipped; break;
      case 4: arg_error = true; [[fallthrough]];
      default: ++s.errors;
    }
  }
  s.exit_code = arg_error ? 2 : s.errors ? 3 : s.failed ? 1 : 0;
  return s;
}

}  // namespace

RunSummary run_checks(const ExperimentConfig& cfg, std::ostream& reports) {
  const auto ctx = make_context(cfg);
  std::optional<spectral::AtomicMeasure> mu;
  return checks_on(cfg, ctx, mu, reports);
}

RunSummary run(const ExperimentConfig& cfg, std::ostream& log) {
  const auto ctx = make_context(cfg);
  std::optional<spectral::AtomicMeasure> mu;
  std::filesystem::create_directories(cfg.output_dir);
  RunSummary s;
  {
    std::ofstream out(std::filesystem::path(cfg.output_dir) / "reports.jsonl");
    s = checks_on(cfg, ctx, mu, out);
  }
  if (cfg.scan) {
    const auto rows = verify::transition_scan(ctx, *mu, cfg.energies(), *cfg.scan);
    std::ofstream out(std::filesystem::path(cfg.output_dir) / "scan.csv");
    out << header_line(cfg.hash) << '\n';
    verify::write_csv(out, rows);
    s.scan_rows = rows.size();
    for (const auto& r : rows)
      if (!r.error.empty()) ++s.errors;
    if (s.errors && s.exit_code != 2) s.exit_code = 3;
  }
  log << "checks: " << s.passed << " pass, " << s.failed << " fail, " << s.skipped
      << " skipped, " << s.errors << " error";
  if (cfg.scan) log << "; scan rows: " << s.scan_rows;
  log << '\n';
  return s;
}

}  // namespace qpspec::config
