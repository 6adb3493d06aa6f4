#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qpspec/arithmetic.hpp"
#include "qpspec/solution.hpp"
#include "qpspec/tridiag.hpp"

namespace qpspec::model {

/// f(y) = gamma * y + offset on [0,1).
struct Sawtooth {
  double gamma = 1.0;
  double offset = 0.0;
};

/// f(y) = lambda * tan(pi (y - 1/2)); increasing on [0,1) with its pole at 0.
struct TangentMonotone {
  double lambda = 1.0;
};

/// f(y) = 2 lambda cos(2 pi y).
struct Cosine {
  double lambda = 1.0;
};

/// Step interpolation: f(y) = values[i] for grid[i] <= y < grid[i+1],
/// extended periodically below grid[0].
struct Table {
  std::vector<double> grid;
  std::vector<double> values;
};

class PotentialSpec {
 public:
  using Kind = std::variant<Sawtooth, TangentMonotone, Cosine, Table>;

  PotentialSpec() : kind_(Sawtooth{}) {}
  explicit PotentialSpec(Kind kind);

  /// The zero potential (a one-point table).
  static PotentialSpec free();

  const Kind& kind() const { return kind_; }
  std::string name() const;
  /// Monotonicity constant where the family has one.
  std::optional<double> gamma() const;
  bool has_poles() const { return std::holds_alternative<TangentMonotone>(kind_); }

  /// f(y) for y in [0,1). Throws Error(SingularSite) within kPoleGuard of a pole.
  double operator()(double y) const;

 private:
  Kind kind_;
};

/// Phases closer than this to a tangent pole are rejected.
inline constexpr double kPoleGuard = 1e-12;

PotentialSpec potential_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PotentialSpec& spec);
/// Two-column CSV (grid point, value); '#' lines and a non-numeric header are skipped.
Table read_table_csv(const std::string& path);

/// Worst slack of f(y) - f(x) - gamma (y - x) over all pairs x < y of the
/// cell midpoints of a uniform grid; nonnegative iff monotone on the grid.
double gamma_monotone_slack(const PotentialSpec& spec, double gamma, std::size_t points);

/// Midpoint rule for the integral of log(1 + |f|) over [0,1) with `points`
/// cells, skipping cells within kPoleGuard of a pole.
double log_integrability(const PotentialSpec& spec, std::size_t points);

/// H(x) with potential V(n) = f(x + n alpha mod 1).
class OperatorPoint {
 public:
  OperatorPoint(PotentialSpec spec, const arithmetic::CFExpansion& alpha, double x);
  /// alpha given as a double-double pair (alpha_lo may be 0 for test frequencies).
  OperatorPoint(PotentialSpec spec, double alpha_hi, double alpha_lo, double x);

  const PotentialSpec& spec() const { return spec_; }
  double x() const { return x_; }
  double alpha() const { return alpha_hi_ + alpha_lo_; }
  double alpha_hi() const { return alpha_hi_; }
  double alpha_lo() const { return alpha_lo_; }

  /// x + n alpha reduced to [0,1), accurate to ~1e-16 for |n| < 2^50.
  double phase(std::int64_t n) const;
  /// V(n); throws SingularSiteError carrying n at a pole.
  double potential(std::int64_t n) const;

 private:
  PotentialSpec spec_;
  double alpha_hi_;
  double alpha_lo_;
  double x_;
};

double sample_potential(const OperatorPoint& op, std::int64_t n);

/// H restricted to [n1, n2]: diagonal V(n1..n2), off-diagonal 1.
Tridiag block_matrix(const OperatorPoint& op, std::int64_t n1, std::int64_t n2);

/// Resolvent of H_I at a real energy E, I = [n1, n2].
class GreenBlock {
 public:
  GreenBlock(const OperatorPoint& op, std::int64_t n1, std::int64_t n2, double E);
  GreenBlock(Tridiag block, std::int64_t n1, double E);

  std::int64_t n1() const { return n1_; }
  std::int64_t n2() const { return n1_ + static_cast<std::int64_t>(block_.size()) - 1; }
  double energy() const { return E_; }
  const Tridiag& block() const { return block_; }

  /// G_I(a, b).
  double entry(std::int64_t a, std::int64_t b) const;
  /// G_I(., b) over the whole interval.
  std::vector<double> column(std::int64_t b) const;
  /// Distance of E to spec(H_I), computed by Sturm bisection.
  double distance_to_spectrum() const;
  double min_pivot() const { return lu_.min_pivot(); }
  /// Threshold below which E counts as in the spectrum.
  double singular_threshold() const;

 private:
  std::size_t index(std::int64_t a) const;

  Tridiag block_;
  std::int64_t n1_;
  double E_;
  TridiagLU lu_;
};

double green_entry(const GreenBlock& block, std::int64_t a, std::int64_t b);

/// |u(n) + G_I(n1, n) u(n1-1) + G_I(n, n2) u(n2+1)| divided by
/// max(1, max |u| over [n1-1, n2+1]). u must cover [n1-1, n2+1] and solve the
/// equation at the block energy.
double expansion_residual(const OperatorPoint& op, const dynamics::SolutionTrace& u,
                          std::int64_t n, std::int64_t n1, std::int64_t n2);

struct Interval {
  std::int64_t n1 = 0;
  std::int64_t n2 = 0;
  std::int64_t length() const { return n2 - n1 + 1; }
  bool contains(std::int64_t n) const { return n1 <= n && n <= n2; }
  bool operator==(const Interval&) const = default;
};

struct RegularResult {
  std::optional<Interval> interval;
  // intervals rejected because E was numerically in spec(H_I)
  std::size_t near_singular_skipped = 0;
  std::size_t candidates = 0;
  // best (largest) value of min_i [ -t|n - n_i| - log|G_I(n, n_i)| ] seen
  double best_margin = -std::numeric_limits<double>::infinity();
};

/// Least margin each boundary end must keep from n for a length-k interval.
std::int64_t regular_half_width(std::int64_t k);

/// Search for the leftmost interval I = [n1, n1+k-1] inside search_window with
/// n - n1 >= (k-1)/2 and n2 - n >= (k-1)/2 (integer halves) such that
/// |G_I(n, n_i)| <= e^{-t|n - n_i|} at both ends.
RegularResult regular_check(const OperatorPoint& op, double E, std::int64_t n, double t,
                            std::int64_t k, Interval search_window);

}  // namespace qpspec::model
