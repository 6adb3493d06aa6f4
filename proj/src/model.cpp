#include "qpspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qpspec/error.hpp"

namespace qpspec::model {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void validate(const PotentialSpec::Kind& kind) {
  std::visit(overloaded{
                 [](const Sawtooth& s) {
                   if (!(s.gamma > 0.0) || !std::isfinite(s.gamma) || !std::isfinite(s.offset))
                     throw Error(ErrorKind::InvalidArgument, "sawtooth needs finite gamma > 0");
                 },
                 [](const TangentMonotone& t) {
                   if (!(t.lambda > 0.0) || !std::isfinite(t.lambda))
                     throw Error(ErrorKind::InvalidArgument, "tangent needs finite lambda > 0");
                 },
                 [](const Cosine& c) {
                   if (!std::isfinite(c.lambda))
                     throw Error(ErrorKind::InvalidArgument, "cosine needs finite lambda");
                 },
                 [](const Table& t) {
                   if (t.grid.empty() || t.grid.size() != t.values.size())
                     throw Error(ErrorKind::ConfigError, "table needs equal nonempty columns");
                   for (std::size_t i = 0; i < t.grid.size(); ++i) {
                     if (!(t.grid[i] >= 0.0 && t.grid[i] < 1.0))
                       throw Error(ErrorKind::ConfigError, "table grid must lie in [0,1)");
                     if (i > 0 && !(t.grid[i] > t.grid[i - 1]))
                       throw Error(ErrorKind::ConfigError, "table grid must be increasing");
                     if (!std::isfinite(t.values[i]))
                       throw Error(ErrorKind::ConfigError, "table values must be finite");
                   }
                 },
             },
             kind);
}

}  // namespace

PotentialSpec::PotentialSpec(Kind kind) : kind_(std::move(kind)) { validate(kind_); }

PotentialSpec PotentialSpec::free() { return PotentialSpec(Table{{0.0}, {0.0}}); }

std::string PotentialSpec::name() const {
  return std::visit(overloaded{[](const Sawtooth&) { return std::string("sawtooth"); },
                               [](const TangentMonotone&) { return std::string("tangent"); },
                               [](const Cosine&) { return std::string("cosine"); },
                               [](const Table&) { return std::string("table"); }},
                    kind_);
}

std::optional<double> PotentialSpec::gamma() const {
  if (const auto* s = std::get_if<Sawtooth>(&kind_)) return s->gamma;
  if (const auto* t = std::get_if<TangentMonotone>(&kind_)) return t->lambda * std::numbers::pi;
  return std::nullopt;
}

double PotentialSpec::operator()(double y) const {
  return std::visit(
      overloaded{
          [y](const Sawtooth& s) { return s.gamma * y + s.offset; },
          [y](const TangentMonotone& t) {
            if (y < kPoleGuard || y > 1.0 - kPoleGuard)
              throw Error(ErrorKind::SingularSite, "tangent potential at its pole");
            return t.lambda * std::tan(std::numbers::pi * (y - 0.5));
          },
          [y](const Cosine& c) { return 2.0 * c.lambda * std::cos(2.0 * std::numbers::pi * y); },
          [y](const Table& t) {
            auto it = std::upper_bound(t.grid.begin(), t.grid.end(), y);
            if (it == t.grid.begin()) return t.values.back();
            return t.values[static_cast<std::size_t>(it - t.grid.begin()) - 1];
          },
      },
      kind_);
}

PotentialSpec potential_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    auto allow = [&](std::initializer_list<const char*> keys) {
      for (const auto& [key, value] : j.items()) {
        if (key == "kind") continue;
        if (std::find_if(keys.begin(), keys.end(), [&](const char* k) { return key == k; }) ==
            keys.end())
          throw Error(ErrorKind::ConfigError, "potential." + key + ": unknown key for " + kind);
      }
    };
    if (kind == "sawtooth") {
      allow({"gamma", "offset"});
      return PotentialSpec(Sawtooth{j.value("gamma", 1.0), j.value("offset", 0.0)});
    }
    if (kind == "tangent") {
      allow({"lambda"});
      return PotentialSpec(TangentMonotone{j.value("lambda", 1.0)});
    }
    if (kind == "cosine") {
      allow({"lambda"});
      return PotentialSpec(Cosine{j.value("lambda", 1.0)});
    }
    if (kind == "free") {
      allow({});
      return PotentialSpec::free();
    }
    if (kind == "table") {
      allow({"grid", "values", "csv"});
      if (j.contains("csv")) return PotentialSpec(read_table_csv(j.at("csv").get<std::string>()));
      return PotentialSpec(Table{j.at("grid").get<std::vector<double>>(),
                                 j.at("values").get<std::vector<double>>()});
    }
    throw Error(ErrorKind::ConfigError, "potential.kind: unknown kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("potential: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument)
      throw Error(ErrorKind::ConfigError, std::string("potential: ") + e.what());
    throw;
  }
}

nlohmann::json to_json(const PotentialSpec& spec) {
  return std::visit(
      overloaded{
          [](const Sawtooth& s) {
            return nlohmann::json{{"kind", "sawtooth"}, {"gamma", s.gamma}, {"offset", s.offset}};
          },
          [](const TangentMonotone& t) {
            return nlohmann::json{{"kind", "tangent"}, {"lambda", t.lambda}};
          },
          [](const Cosine& c) { return nlohmann::json{{"kind", "cosine"}, {"lambda", c.lambda}}; },
          [](const Table& t) {
            return nlohmann::json{{"kind", "table"}, {"grid", t.grid}, {"values", t.values}};
          },
      },
      spec.kind());
}

Table read_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open table '" + path + "'");
  Table t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double y = 0.0, v = 0.0;
    std::string extra;
    if (!(fields >> y >> v) || (fields >> extra)) {
      if (lineno == 1 && t.grid.empty()) continue;  // header
      throw Error(ErrorKind::ConfigError,
                  path + ":" + std::to_string(lineno) + ": expected two numeric columns");
    }
    t.grid.push_back(y);
    t.values.push_back(v);
  }
  validate(t);
  return t;
}

double gamma_monotone_slack(const PotentialSpec& spec, double gamma, std::size_t points) {
  if (points < 2) throw Error(ErrorKind::InvalidArgument, "need at least two grid points");
  // f(y) - gamma y nondecreasing on the grid <=> all pairs satisfy the bound;
  // the worst pair slack is the most negative drop of g = f - gamma y.
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double y = (static_cast<double>(i) + 0.5) / static_cast<double>(points);
    g[i] = spec(y) - gamma * y;
  }
  double worst = std::numeric_limits<double>::infinity();
  double running_max = g[0];
  for (std::size_t i = 1; i < points; ++i) {
    worst = std::min(worst, g[i] - running_max);
    running_max = std::max(running_max, g[i]);
  }
  return worst;
}

double log_integrability(const PotentialSpec& spec, std::size_t points) {
  if (points < 1) throw Error(ErrorKind::InvalidArgument, "need at least one cell");
  double sum = 0.0;
  const double h = 1.0 / static_cast<double>(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double y = (static_cast<double>(i) + 0.5) * h;
    if (spec.has_poles() && (y < kPoleGuard || y > 1.0 - kPoleGuard)) continue;
    sum += std::log1p(std::fabs(spec(y)));
  }
  return sum * h;
}

OperatorPoint::OperatorPoint(PotentialSpec spec, const arithmetic::CFExpansion& alpha, double x)
    : OperatorPoint(std::move(spec), alpha.alpha_hi, alpha.alpha_lo, x) {}

OperatorPoint::OperatorPoint(PotentialSpec spec, double alpha_hi, double alpha_lo, double x)
    : spec_(std::move(spec)), alpha_hi_(alpha_hi), alpha_lo_(alpha_lo) {
  if (!std::isfinite(x) || !std::isfinite(alpha_hi) || !std::isfinite(alpha_lo))
    throw Error(ErrorKind::InvalidArgument, "phase and frequency must be finite");
  x_ = x - std::floor(x);
  if (x_ >= 1.0) x_ = 0.0;
}

double OperatorPoint::phase(std::int64_t n) const {
  const double nd = static_cast<double>(n);
  const double p = nd * alpha_hi_;
  const double p_err = std::fma(nd, alpha_hi_, -p);
  double y = (p - std::floor(p)) + x_;
  y += p_err + nd * alpha_lo_;
  y -= std::floor(y);
  if (y >= 1.0) y = 0.0;
  return y;
}

double OperatorPoint::potential(std::int64_t n) const {
  const double y = phase(n);
  try {
    return spec_(y);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::SingularSite)
      throw SingularSiteError(n, "V(" + std::to_string(n) + ") at a pole of the potential");
    throw;
  }
}

double sample_potential(const OperatorPoint& op, std::int64_t n) { return op.potential(n); }

Tridiag block_matrix(const OperatorPoint& op, std::int64_t n1, std::int64_t n2) {
  if (n2 < n1) throw Error(ErrorKind::InvalidArgument, "block needs n2 >= n1");
  const auto size = static_cast<std::size_t>(n2 - n1 + 1);
  Tridiag t;
  t.diag.resize(size);
  t.off.assign(size - 1, 1.0);
  for (std::size_t i = 0; i < size; ++i)
    t.diag[i] = op.potential(n1 + static_cast<std::int64_t>(i));
  return t;
}

namespace {

double threshold_for(const Tridiag& block) {
  return 1e-12 * std::max(1.0, block.radius_bound());
}

const Tridiag& checked(const Tridiag& block, double E) {
  const double threshold = threshold_for(block);
  // E is within threshold of spec(H_I) iff the Sturm count changes across it
  if (sturm_count(block, E - threshold) != sturm_count(block, E + threshold)) {
    const double dist = distance_to_spectrum(block, E);
    throw NearSingularEnergyError(
        dist, "E is within " + std::to_string(dist) + " of the block spectrum");
  }
  return block;
}

}  // namespace

GreenBlock::GreenBlock(const OperatorPoint& op, std::int64_t n1, std::int64_t n2, double E)
    : GreenBlock(block_matrix(op, n1, n2), n1, E) {}

GreenBlock::GreenBlock(Tridiag block, std::int64_t n1, double E)
    : block_(std::move(block)), n1_(n1), E_(E), lu_(checked(block_, E), E) {}

double GreenBlock::singular_threshold() const { return threshold_for(block_); }

std::size_t GreenBlock::index(std::int64_t a) const {
  if (a < n1_ || a > n2())
    throw Error(ErrorKind::InvalidArgument,
                "site " + std::to_string(a) + " outside [" + std::to_string(n1_) + ", " +
                    std::to_string(n2()) + "]");
  return static_cast<std::size_t>(a - n1_);
}

double GreenBlock::entry(std::int64_t a, std::int64_t b) const {
  const std::size_t ia = index(a);
  return lu_.inverse_column(index(b))[ia];
}

std::vector<double> GreenBlock::column(std::int64_t b) const {
  return lu_.inverse_column(index(b));
}

double GreenBlock::distance_to_spectrum() const { return qpspec::distance_to_spectrum(block_, E_); }

double green_entry(const GreenBlock& block, std::int64_t a, std::int64_t b) {
  return block.entry(a, b);
}

double expansion_residual(const OperatorPoint& op, const dynamics::SolutionTrace& u,
                          std::int64_t n, std::int64_t n1, std::int64_t n2) {
  if (!(n1 <= n && n <= n2))
    throw Error(ErrorKind::InvalidArgument, "n must lie in the interval");
  if (!u.covers(n1 - 1) || !u.covers(n2 + 1))
    throw Error(ErrorKind::RangeError, "trace does not cover the interval boundary");
  GreenBlock g(op, n1, n2, u.energy);
  double shift = -std::numeric_limits<double>::infinity();
  for (std::int64_t j = n1 - 1; j <= n2 + 1; ++j) shift = std::max(shift, u.log_abs(j));
  if (!std::isfinite(shift)) return 0.0;
  const auto col_n = g.column(n);
  const double g1 = col_n[0];
  const double g2 = col_n[static_cast<std::size_t>(n2 - n1)];
  const double r = u.scaled(n, shift) + g1 * u.scaled(n1 - 1, shift) + g2 * u.scaled(n2 + 1, shift);
  return std::fabs(r) * std::exp(std::min(shift, 0.0));
}

std::int64_t regular_half_width(std::int64_t k) {
  if (k < 2) throw Error(ErrorKind::InvalidK, "regularity needs k >= 2 (room on both sides)");
  return (k - 1) / 2;
}

RegularResult regular_check(const OperatorPoint& op, double E, std::int64_t n, double t,
                            std::int64_t k, Interval search_window) {
  const std::int64_t m = regular_half_width(k);
  RegularResult out;
  // n1 ranges so that n - n1 >= m and n1 + k - 1 - n >= m
  const std::int64_t lo = std::max(n - k + 1 + m, search_window.n1);
  const std::int64_t hi = std::min(n - m, search_window.n2 - k + 1);
  for (std::int64_t n1 = lo; n1 <= hi; ++n1) {
    const std::int64_t n2 = n1 + k - 1;
    ++out.candidates;
    try {
      GreenBlock g(op, n1, n2, E);
      const auto col = g.column(n);
      const double left = std::log(std::fabs(col.front()));
      const double right = std::log(std::fabs(col.back()));
      const double margin = std::min(-t * static_cast<double>(n - n1) - left,
                                     -t * static_cast<double>(n2 - n) - right);
      out.best_margin = std::max(out.best_margin, margin);
      if (margin >= 0.0) {
        out.interval = Interval{n1, n2};
        return out;
      }
    } catch (const NearSingularEnergyError&) {
      ++out.near_singular_skipped;
    }
  }
  return out;
}

}  // namespace qpspec::model
