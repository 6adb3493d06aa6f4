#include "qpspec/dimension.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "qpspec/error.hpp"

namespace qpspec::dimension {

namespace {

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

void check_beta(double L, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::BetaZero, "beta must be positive");
  if (!(L >= 0.0)) throw Error(ErrorKind::InvalidArgument, "L must be >= 0");
}

void check_grid(std::span<const double> g) {
  if (g.size() < 2) throw Error(ErrorKind::InvalidArgument, "eps grid needs two points");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0 && g[i] < 1.0))
      throw Error(ErrorKind::InvalidArgument, "eps grid must lie in (0, 1)");
    if (i > 0 && !(g[i] < g[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "eps grid must be strictly decreasing");
  }
}

}  // namespace

double packing_bound(double L, double beta) {
  check_beta(L, beta);
  const double lam = std::min(L, beta);
  return clip01(2.0 * (1.0 - lam / beta));
}

double renyi_bound(double L, double beta) {
  check_beta(L, beta);
  const double lam = std::min(L, beta);
  return clip01((2.0 * beta - 2.0 * lam) / (2.0 * beta - lam));
}

double renyi_sum(const AtomicMeasure& mu, double q, double eps) {
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "eps must be positive");
  if (!(q > 0.0)) throw Error(ErrorKind::InvalidArgument, "q must be positive");
  double total = 0.0;
  double cell_mass = 0.0;
  bool open = false;
  double cell = 0.0;
  for (const auto& a : mu.atoms()) {
    const double j = std::floor(a.E / eps);
    if (!open || j != cell) {
      if (open && cell_mass > 0.0) total += std::pow(cell_mass, q);
      cell = j;
      cell_mass = 0.0;
      open = true;
    }
    cell_mass += a.w;
  }
  if (open && cell_mass > 0.0) total += std::pow(cell_mass, q);
  return total;
}

std::vector<double> default_grid(double hi, std::size_t count) {
  std::vector<double> g(count);
  for (std::size_t k = 0; k < count; ++k) g[k] = std::ldexp(hi, -static_cast<int>(k));
  return g;
}

DimensionReport renyi_dimension(const AtomicMeasure& mu, double q,
                                std::span<const double> eps_grid) {
  check_grid(eps_grid);
  if (!(q >= 1.5)) throw Error(ErrorKind::InvalidArgument, "Renyi dimension needs q >= 3/2");
  if (mu.size() == 0 || mu.total_mass() <= 0.0)
    throw Error(ErrorKind::EmptySample, "measure has no mass");
  const auto& at = mu.atoms();
  const double spacing =
      at.size() > 1 ? (at.back().E - at.front().E) / static_cast<double>(at.size() - 1) : 0.0;
  if (eps_grid.back() < 10.0 * spacing)
    throw Error(ErrorKind::ResolutionFloor,
                "eps grid reaches " + std::to_string(eps_grid.back()) +
                    ", below 10x the mean atom spacing " + std::to_string(spacing));
  DimensionReport r;
  r.target = "renyi(" + std::to_string(q) + ")";
  r.q = q;
  r.grid.assign(eps_grid.begin(), eps_grid.end());
  r.normalization = "log S(q,eps) / ((q+1) log eps)";
  for (double e : eps_grid) r.values.push_back(std::log(renyi_sum(mu, q, e)) / ((q + 1.0) * std::log(e)));
  r.raw_estimate = *std::max_element(r.values.begin() + static_cast<std::ptrdiff_t>(r.values.size() / 2),
                                     r.values.end());
  r.estimate = clip01(r.raw_estimate);
  return r;
}

std::vector<double> sample_support(const AtomicMeasure& mu, std::size_t count) {
  if (count == 0 || mu.total_mass() <= 0.0)
    throw Error(ErrorKind::EmptySample, "nothing to sample");
  std::vector<double> out;
  out.reserve(count);
  const auto& at = mu.atoms();
  double cum = 0.0;
  std::size_t i = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const double target = (static_cast<double>(k) + 0.5) / static_cast<double>(count) * mu.total_mass();
    while (i + 1 < at.size() && cum + at[i].w < target) cum += at[i++].w;
    out.push_back(at[i].E);
  }
  return out;
}

double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p) {
  if (values.empty()) throw Error(ErrorKind::EmptySample, "no samples");
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) total += w(i);
  if (!(total > 0.0)) throw Error(ErrorKind::EmptySample, "sample weights sum to zero");
  double cum = 0.0;
  for (std::size_t i : idx) {
    cum += w(i);
    if (cum >= p * total * (1.0 - 1e-12)) return values[i];
  }
  return values[idx.back()];
}

DimensionReport packing_dim_estimate(const AtomicMeasure& mu, std::span<const double> sample_points,
                                     std::span<const double> eps_grid,
                                     std::span<const double> weights) {
  check_grid(eps_grid);
  if (sample_points.empty()) throw Error(ErrorKind::EmptySample, "no sample points");
  if (!weights.empty() && weights.size() != sample_points.size())
    throw Error(ErrorKind::InvalidArgument, "one weight per sample point");
  DimensionReport r;
  r.target = "packing_upper";
  r.grid.assign(eps_grid.begin(), eps_grid.end());
  r.sample_points.assign(sample_points.begin(), sample_points.end());
  r.normalization = "weighted 95th percentile of gamma+ over samples";
  for (double E : sample_points) r.values.push_back(spectral::local_exponents(mu, E, eps_grid).gamma_plus);
  r.raw_estimate = weighted_quantile(r.values, weights, 0.95);
  r.estimate = clip01(r.raw_estimate);
  return r;
}

nlohmann::json to_json(const DimensionReport& r) {
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  nlohmann::json values = nlohmann::json::array();
  for (double v : r.values) values.push_back(num(v));
  return {{"target", r.target},       {"q", num(r.q)},
          {"estimate", r.estimate},   {"raw_estimate", num(r.raw_estimate)},
          {"bound", num(r.bound)},    {"slack", num(r.slack())},
          {"grid", r.grid},           {"values", values},
          {"samples", r.sample_points}, {"normalization", r.normalization}};
}

void write_csv(std::ostream& out, const DimensionReport& r) {
  out.precision(17);
  if (r.sample_points.empty()) {
    out << "eps,ratio\n";
    for (std::size_t i = 0; i < r.grid.size(); ++i) out << r.grid[i] << ',' << r.values[i] << '\n';
  } else {
    out << "E,gamma_plus\n";
    for (std::size_t i = 0; i < r.sample_points.size(); ++i)
      out << r.sample_points[i] << ',' << r.values[i] << '\n';
  }
}

}  // namespace qpspec::dimension
