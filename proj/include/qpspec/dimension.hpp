#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "qpspec/spectral.hpp"

namespace qpspec::dimension {

using spectral::AtomicMeasure;

/// 2(1 - min(L, beta)/beta) clipped to [0, 1].
double packing_bound(double L, double beta);
/// (2 beta - 2 Lam)/(2 beta - Lam) with Lam = min(L, beta), clipped to [0, 1].
double renyi_bound(double L, double beta);

/// sum_j mu([j eps, (j+1) eps))^q.
double renyi_sum(const AtomicMeasure& mu, double q, double eps);

struct DimensionReport {
  std::string target;  // "packing_upper" or "renyi(q)"
  double q = std::numeric_limits<double>::quiet_NaN();
  double estimate = 0.0;      // clipped to [0, 1]
  double raw_estimate = 0.0;  // before clipping
  double bound = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> grid;
  // per-scale ratios (Renyi) or per-sample gamma+ (packing)
  std::vector<double> values;
  std::vector<double> sample_points;
  std::string normalization;

  double slack() const { return estimate - bound; }
};

nlohmann::json to_json(const DimensionReport& r);
/// One row per grid scale (Renyi) or per sample (packing).
void write_csv(std::ostream& out, const DimensionReport& r);

/// eps_k = hi * 2^-k, k = 0..count-1.
std::vector<double> default_grid(double hi = 0.1, std::size_t count = 12);

/// max over the last half of the grid of log S(q, eps) / ((q + 1) log eps).
DimensionReport renyi_dimension(const AtomicMeasure& mu, double q,
                                std::span<const double> eps_grid);

/// count deterministic weight-proportional draws: atom locations at the
/// cumulative-mass quantiles (k + 1/2)/count.
std::vector<double> sample_support(const AtomicMeasure& mu, std::size_t count);

/// Weighted 95th percentile of gamma+(E) over the sample points (equal
/// weights when `weights` is empty).
DimensionReport packing_dim_estimate(const AtomicMeasure& mu, std::span<const double> sample_points,
                                     std::span<const double> eps_grid,
                                     std::span<const double> weights = {});

/// Smallest x with cumulative weight >= p * total among (value, weight) pairs.
double weighted_quantile(std::span<const double> values, std::span<const double> weights,
                         double p);

}  // namespace qpspec::dimension
