#pragma once

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qpspec/dynamics.hpp"
#include "qpspec/model.hpp"

namespace qpspec::spectral {

using cplx = std::complex<double>;
using dynamics::Side;

struct MFunctionValue {
  cplx z;
  cplx value;
  std::int64_t truncation_N = 0;
  bool converged = false;
};

/// Borel transform of the boundary spectral measure of the half-line operator
/// H_theta^+ (boundary site 1, diagonal V(1) - tan theta) or H_theta^- (boundary
/// site 0, diagonal V(0) - cot theta). theta = pi/2 on "+" and theta = 0 on "-"
/// use the potential shifted by one site. Computed on N sites with a Dirichlet
/// far end; N starts at 64 and doubles until the value moves by < tol |value|.
MFunctionValue half_line_m(const model::OperatorPoint& op, cplx z, double theta, Side sign,
                           double tol = 1e-10);

/// Same continued fraction on a fixed number of sites.
cplx half_line_m_fixed(const model::OperatorPoint& op, cplx z, double theta, Side sign,
                       std::int64_t N);

struct FullLineM {
  cplx z;
  cplx M;
  // <d0, (H - z)^-1 d0> and <d1, (H - z)^-1 d1>
  cplx M0;
  cplx M1;
  // half-line data entering the combination formula
  cplx m_plus;
  cplx m_minus;
  std::int64_t truncation_N = 0;
};

/// M = M0 + M1 from the two half-line m-functions.
FullLineM full_line_M(const model::OperatorPoint& op, cplx z, double tol = 1e-10);

/// M0, M1 from a pivoted complex tridiagonal solve on [-N, N], N doubling
/// from 64 until both move by < tol relative.
FullLineM direct_resolvent(const model::OperatorPoint& op, cplx z, double tol = 1e-10);

struct Atom {
  double E = 0.0;
  double w = 0.0;
};

class AtomicMeasure {
 public:
  AtomicMeasure() = default;
  /// Sorts the atoms by location; rejects negative weights.
  explicit AtomicMeasure(std::vector<Atom> atoms, std::int64_t block_N = 0,
                         std::int64_t bc_average = 0);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double total_mass() const { return total_; }
  std::int64_t block_N() const { return block_N_; }
  std::int64_t bc_average() const { return bc_average_; }

  /// mu((a, b)).
  double mass(double a, double b) const;
  /// mu((-inf, x]).
  double cdf(double x) const;
  /// Mean gap between the atoms inside [E - r, E + r]; 0 with fewer than two.
  double spacing_near(double E, double r) const;

 private:
  std::vector<Atom> atoms_;
  std::vector<double> prefix_;
  double total_ = 0.0;
  std::int64_t block_N_ = 0;
  std::int64_t bc_average_ = 0;
};

/// sup_x |F_a(x)/|a| - F_b(x)/|b|| over x at least `resolution` away from
/// every atom, so atoms that agree to that resolution count as coincident.
double ks_distance(const AtomicMeasure& a, const AtomicMeasure& b, double resolution = 1e-9);

/// Boundary terms added to the two end sites for the k-th of `count` blocks.
double boundary_term(std::int64_t k, std::int64_t count);

/// Eigenpairs of H on [-N, N] with weights psi(0)^2 + psi(1)^2, one block per
/// boundary term, each block weighted 1/bc_average.
AtomicMeasure empirical_measure(const model::OperatorPoint& op, std::int64_t N,
                                std::int64_t bc_average = 1);
AtomicMeasure empirical_measure_serial(const model::OperatorPoint& op, std::int64_t N,
                                       std::int64_t bc_average = 1);

enum class Trend { Diverging, Bounded, Vanishing };
std::string_view to_string(Trend t);

struct EtaDerivative {
  std::vector<double> values;
  double slope = 0.0;
  Trend trend = Trend::Bounded;
};

/// mu(E - eps, E + eps) / eps^eta along a decreasing grid in (0, 1]; the trend
/// comes from the log-log slope over the last half of the grid.
EtaDerivative lower_eta_derivative(const AtomicMeasure& mu, double E, double eta,
                                   std::span<const double> eps_grid);

struct LocalExponents {
  double gamma_minus = 0.0;
  double gamma_plus = 0.0;
};

/// min / max of log mu(E - eps, E + eps) / log eps over the last half of the grid.
LocalExponents local_exponents(const AtomicMeasure& mu, double E,
                               std::span<const double> eps_grid);

/// count points from hi down to lo, evenly spaced in log.
std::vector<double> geometric_grid(double hi, double lo, std::size_t count);

void write_csv(std::ostream& out, const AtomicMeasure& mu);

}  // namespace qpspec::spectral
