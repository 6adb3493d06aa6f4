#include "qpspec/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <ostream>

#include "qpspec/error.hpp"
#include "qpspec/tridiag.hpp"

namespace qpspec::spectral {

namespace {

constexpr std::int64_t kStartN = 64;
constexpr std::int64_t kMaxN = std::int64_t{1} << 22;
constexpr double kAngleSnap = 1e-12;

struct HalfLineSetup {
  std::int64_t first;
  std::int64_t dir;
  double boundary_shift;
};

HalfLineSetup setup(double theta, Side sign) {
  if (!std::isfinite(theta)) throw Error(ErrorKind::InvalidArgument, "theta must be finite");
  double t = std::fmod(theta, std::numbers::pi);
  if (t < 0) t += std::numbers::pi;
  if (sign == Side::Plus) {
    if (std::fabs(t - 0.5 * std::numbers::pi) < kAngleSnap) return {2, 1, 0.0};
    return {1, 1, std::tan(t)};
  }
  if (t < kAngleSnap || std::numbers::pi - t < kAngleSnap) return {-1, -1, 0.0};
  return {0, -1, 1.0 / std::tan(t)};
}

void check_z(cplx z) {
  if (!(z.imag() >= 1e-6) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw Error(ErrorKind::InvalidArgument, "need Im z >= 1e-6");
}

cplx continued_fraction(const model::OperatorPoint& op, cplx z, const HalfLineSetup& s,
                        std::int64_t N) {
  cplx g = 0.0;
  for (std::int64_t k = N - 1; k >= 0; --k) {
    const std::int64_t site = s.first + s.dir * k;
    double diag = op.potential(site);
    if (k == 0) diag -= s.boundary_shift;
    g = 1.0 / (diag - z - g);
  }
  return g;
}

// Gaussian elimination with partial pivoting on a complex tridiagonal system
// (LAPACK gtsv scheme), applied to several right-hand sides.
void gtsv(std::vector<cplx> dl, std::vector<cplx> d, std::vector<cplx> du,
          std::vector<std::vector<cplx>>& rhs) {
  const std::size_t n = d.size();
  auto mag = [](cplx c) { return std::fabs(c.real()) + std::fabs(c.imag()); };
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (dl[k] == 0.0) {
      if (d[k] == 0.0) throw Error(ErrorKind::Cancellation, "singular tridiagonal system");
    } else if (mag(d[k]) >= mag(dl[k])) {
      const cplx mult = dl[k] / d[k];
      d[k + 1] -= mult * du[k];
      for (auto& b : rhs) b[k + 1] -= mult * b[k];
      if (k + 2 < n) dl[k] = 0.0;
    } else {
      const cplx mult = d[k] / dl[k];
      d[k] = dl[k];
      const cplx temp = d[k + 1];
      d[k + 1] = du[k] - mult * temp;
      if (k + 2 < n) {
        dl[k] = du[k + 1];
        du[k + 1] = -mult * dl[k];
      }
      du[k] = temp;
      for (auto& b : rhs) {
        const cplx t = b[k];
        b[k] = b[k + 1];
        b[k + 1] = t - mult * b[k + 1];
      }
    }
  }
  if (d[n - 1] == 0.0) throw Error(ErrorKind::Cancellation, "singular tridiagonal system");
  for (auto& b : rhs) {
    b[n - 1] /= d[n - 1];
    if (n > 1) b[n - 2] = (b[n - 2] - du[n - 2] * b[n - 1]) / d[n - 2];
    for (std::size_t k = n - 2; k-- > 0;)
      b[k] = (b[k] - du[k] * b[k + 1] - dl[k] * b[k + 2]) / d[k];
  }
}

std::pair<cplx, cplx> direct_fixed(const model::OperatorPoint& op, cplx z, std::int64_t N) {
  const auto n = static_cast<std::size_t>(2 * N + 1);
  std::vector<cplx> d(n), off(n - 1, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    d[i] = op.potential(static_cast<std::int64_t>(i) - N) - z;
  std::vector<std::vector<cplx>> rhs(2, std::vector<cplx>(n, 0.0));
  const auto i0 = static_cast<std::size_t>(N);
  rhs[0][i0] = 1.0;
  rhs[1][i0 + 1] = 1.0;
  gtsv(off, d, off, rhs);
  return {rhs[0][i0], rhs[1][i0 + 1]};
}

}  // namespace

cplx half_line_m_fixed(const model::OperatorPoint& op, cplx z, double theta, Side sign,
                       std::int64_t N) {
  check_z(z);
  if (N < 1) throw Error(ErrorKind::InvalidArgument, "need N >= 1");
  return continued_fraction(op, z, setup(theta, sign), N);
}

MFunctionValue half_line_m(const model::OperatorPoint& op, cplx z, double theta, Side sign,
                           double tol) {
  check_z(z);
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidArgument, "tol must be positive");
  const auto s = setup(theta, sign);
  cplx prev = continued_fraction(op, z, s, kStartN);
  for (std::int64_t N = 2 * kStartN; N <= kMaxN; N *= 2) {
    const cplx cur = continued_fraction(op, z, s, N);
    if (std::abs(cur - prev) < tol * std::abs(cur)) return {z, cur, N, true};
    prev = cur;
  }
  throw Error(ErrorKind::NoConvergence,
              "half-line m-function did not settle by N = 2^22 (Im z too small?)");
}

FullLineM full_line_M(const model::OperatorPoint& op, cplx z, double tol) {
  const auto mp = half_line_m(op, z, 0.0, Side::Plus, tol);
  const auto h = half_line_m(op, z, 0.0, Side::Minus, tol);
  // G(0,0) of the left half-line [.., 0] is 1/a
  const cplx a = op.potential(0) - z - h.value;
  FullLineM out;
  out.z = z;
  out.m_plus = mp.value;
  out.m_minus = -a;
  out.truncation_N = std::max(mp.truncation_N, h.truncation_N);
  const cplx sum = out.m_plus + out.m_minus;
  if (std::abs(sum) < 1e-12)
    throw Error(ErrorKind::Cancellation, "m+ + m- vanishes to 1e-12");
  out.M0 = -1.0 / sum;
  out.M1 = out.m_plus * out.m_minus / sum;
  out.M = (out.m_plus * out.m_minus - 1.0) / sum;
  return out;
}

FullLineM direct_resolvent(const model::OperatorPoint& op, cplx z, double tol) {
  check_z(z);
  auto prev = direct_fixed(op, z, kStartN);
  for (std::int64_t N = 2 * kStartN; N <= kMaxN; N *= 2) {
    const auto cur = direct_fixed(op, z, N);
    if (std::abs(cur.first - prev.first) < tol * std::abs(cur.first) &&
        std::abs(cur.second - prev.second) < tol * std::abs(cur.second)) {
      FullLineM out;
      out.z = z;
      out.M0 = cur.first;
      out.M1 = cur.second;
      out.M = cur.first + cur.second;
      out.truncation_N = N;
      return out;
    }
    prev = cur;
  }
  throw Error(ErrorKind::NoConvergence, "direct resolvent did not settle by N = 2^22");
}

AtomicMeasure::AtomicMeasure(std::vector<Atom> atoms, std::int64_t block_N,
                             std::int64_t bc_average)
    : atoms_(std::move(atoms)), block_N_(block_N), bc_average_(bc_average) {
  for (const auto& a : atoms_)
    if (!(a.w >= 0.0) || !std::isfinite(a.E))
      throw Error(ErrorKind::InvalidArgument, "atoms need finite locations and weights >= 0");
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const Atom& x, const Atom& y) { return x.E < y.E; });
  prefix_.assign(atoms_.size() + 1, 0.0);
  for (std::size_t i = 0; i < atoms_.size(); ++i) prefix_[i + 1] = prefix_[i] + atoms_[i].w;
  total_ = prefix_.back();
}

double AtomicMeasure::mass(double a, double b) const {
  if (!(a < b)) return 0.0;
  const auto lo = std::upper_bound(atoms_.begin(), atoms_.end(), a,
                                   [](double x, const Atom& t) { return x < t.E; });
  const auto hi = std::lower_bound(atoms_.begin(), atoms_.end(), b,
                                   [](const Atom& t, double x) { return t.E < x; });
  if (hi <= lo) return 0.0;
  // short ranges are summed directly so small masses keep full precision
  if (hi - lo <= 64) {
    double s = 0.0;
    for (auto it = lo; it != hi; ++it) s += it->w;
    return s;
  }
  return prefix_[static_cast<std::size_t>(hi - atoms_.begin())] -
         prefix_[static_cast<std::size_t>(lo - atoms_.begin())];
}

double AtomicMeasure::cdf(double x) const {
  const auto hi = std::upper_bound(atoms_.begin(), atoms_.end(), x,
                                   [](double v, const Atom& t) { return v < t.E; });
  return prefix_[static_cast<std::size_t>(hi - atoms_.begin())];
}

double AtomicMeasure::spacing_near(double E, double r) const {
  const auto lo = std::lower_bound(atoms_.begin(), atoms_.end(), E - r,
                                   [](const Atom& t, double x) { return t.E < x; });
  const auto hi = std::upper_bound(atoms_.begin(), atoms_.end(), E + r,
                                   [](double x, const Atom& t) { return x < t.E; });
  if (hi - lo < 2) return 0.0;
  return ((hi - 1)->E - lo->E) / static_cast<double>(hi - lo - 1);
}

double ks_distance(const AtomicMeasure& a, const AtomicMeasure& b, double resolution) {
  if (a.total_mass() <= 0.0 || b.total_mass() <= 0.0)
    throw Error(ErrorKind::InvalidArgument, "KS distance needs two nonzero measures");
  double worst = 0.0;
  auto probe = [&](double x) {
    worst = std::max(worst, std::fabs(a.cdf(x) / a.total_mass() - b.cdf(x) / b.total_mass()));
  };
  std::vector<double> xs;
  for (const auto* m : {&a, &b})
    for (const auto& t : m->atoms()) {
      xs.push_back(t.E - resolution);
      xs.push_back(t.E + resolution);
    }
  auto near_atom = [&](const AtomicMeasure& m, double x) {
    return m.mass(x - 0.5 * resolution, x + 0.5 * resolution) > 0.0;
  };
  for (double x : xs)
    if (!near_atom(a, x) && !near_atom(b, x)) probe(x);
  return worst;
}

double boundary_term(std::int64_t k, std::int64_t count) {
  if (count <= 1) return 0.0;
  return 1.0 / std::tan(std::numbers::pi * (static_cast<double>(k) + 0.5) /
                        static_cast<double>(count));
}

namespace {

std::vector<Atom> block_atoms(const model::OperatorPoint& op, std::int64_t N, std::int64_t k,
                              std::int64_t count) {
  Tridiag t = model::block_matrix(op, -N, N);
  const double b = boundary_term(k, count);
  t.diag.front() += b;
  t.diag.back() += b;
  const std::size_t rows[2] = {static_cast<std::size_t>(N), static_cast<std::size_t>(N + 1)};
  const auto eig = eigen_restricted(t, rows);
  std::vector<Atom> out(eig.values.size());
  const double scale = 1.0 / static_cast<double>(count);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double c0 = eig.components[0][j], c1 = eig.components[1][j];
    out[j] = {eig.values[j], (c0 * c0 + c1 * c1) * scale};
  }
  return out;
}

AtomicMeasure measure(const model::OperatorPoint& op, std::int64_t N, std::int64_t count,
                      bool parallel) {
  if (N < 50) throw Error(ErrorKind::InvalidArgument, "empirical measure needs N >= 50");
  if (count < 1) throw Error(ErrorKind::InvalidArgument, "bc_average must be >= 1");
  std::vector<std::vector<Atom>> blocks(static_cast<std::size_t>(count));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t k = 0; k < count; ++k) {
    try {
      blocks[static_cast<std::size_t>(k)] = block_atoms(op, N, k, count);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<Atom> all;
  for (auto& b : blocks) all.insert(all.end(), b.begin(), b.end());
  return AtomicMeasure(std::move(all), N, count);
}

}  // namespace

AtomicMeasure empirical_measure(const model::OperatorPoint& op, std::int64_t N,
                                std::int64_t bc_average) {
  return measure(op, N, bc_average, true);
}

AtomicMeasure empirical_measure_serial(const model::OperatorPoint& op, std::int64_t N,
                                       std::int64_t bc_average) {
  return measure(op, N, bc_average, false);
}

std::string_view to_string(Trend t) {
  switch (t) {
    case Trend::Diverging: return "diverging";
    case Trend::Bounded: return "bounded";
    case Trend::Vanishing: return "vanishing";
  }
  return "unknown";
}

namespace {

void check_grid(std::span<const double> g) {
  if (g.size() < 2) throw Error(ErrorKind::InvalidArgument, "eps grid needs two points");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0 && g[i] <= 1.0))
      throw Error(ErrorKind::InvalidArgument, "eps grid must lie in (0, 1]");
    if (i > 0 && !(g[i] < g[i - 1]))
      throw Error(ErrorKind::InvalidArgument, "eps grid must be decreasing");
  }
}

}  // namespace

EtaDerivative lower_eta_derivative(const AtomicMeasure& mu, double E, double eta,
                                   std::span<const double> eps_grid) {
  check_grid(eps_grid);
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "eta must be in [0,1]");
  const double spacing = mu.spacing_near(E, eps_grid.front());
  if (eps_grid.back() < 10.0 * spacing)
    throw Error(ErrorKind::ResolutionFloor,
                "eps grid reaches " + std::to_string(eps_grid.back()) +
                    ", below 10x the local atom spacing " + std::to_string(spacing));
  EtaDerivative out;
  for (double e : eps_grid) out.values.push_back(mu.mass(E - e, E + e) / std::pow(e, eta));
  const std::size_t start = eps_grid.size() / 2;
  const std::size_t m = eps_grid.size() - start;
  bool zero = false;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = start; i < eps_grid.size(); ++i) {
    if (out.values[i] <= 0.0) {
      zero = true;
      break;
    }
    const double x = std::log(eps_grid[i]), y = std::log(out.values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (zero) {
    out.slope = std::numeric_limits<double>::infinity();
  } else if (m < 2) {
    out.slope = 0.0;
  } else {
    const double md = static_cast<double>(m);
    out.slope = (md * sxy - sx * sy) / (md * sxx - sx * sx);
  }
  out.trend = out.slope < -0.1 ? Trend::Diverging
              : out.slope > 0.1 ? Trend::Vanishing
                                : Trend::Bounded;
  return out;
}

LocalExponents local_exponents(const AtomicMeasure& mu, double E,
                               std::span<const double> eps_grid) {
  check_grid(eps_grid);
  if (mu.mass(E - eps_grid.front(), E + eps_grid.front()) <= 0.0)
    throw Error(ErrorKind::EmptyWindow, "no mass within the largest eps of E");
  LocalExponents out{std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity()};
  for (std::size_t i = eps_grid.size() / 2; i < eps_grid.size(); ++i) {
    const double e = eps_grid[i];
    if (e >= 1.0) continue;
    const double m = mu.mass(E - e, E + e);
    const double r =
        m > 0.0 ? std::log(m) / std::log(e) : std::numeric_limits<double>::infinity();
    out.gamma_minus = std::min(out.gamma_minus, r);
    out.gamma_plus = std::max(out.gamma_plus, r);
  }
  return out;
}

std::vector<double> geometric_grid(double hi, double lo, std::size_t count) {
  if (!(hi > lo && lo > 0.0) || count < 2)
    throw Error(ErrorKind::InvalidArgument, "geometric grid needs hi > lo > 0 and count >= 2");
  std::vector<double> g(count);
  const double lh = std::log(hi), ll = std::log(lo);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = std::exp(lh + (ll - lh) * static_cast<double>(i) / static_cast<double>(count - 1));
  g.front() = hi;
  g.back() = lo;
  return g;
}

void write_csv(std::ostream& out, const AtomicMeasure& mu) {
  out << "E,w\n";
  out.precision(17);
  for (const auto& a : mu.atoms()) out << a.E << ',' << a.w << '\n';
}

}  // namespace qpspec::spectral
