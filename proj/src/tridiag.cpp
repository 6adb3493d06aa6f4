#include "qpspec/tridiag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qpspec/error.hpp"

namespace qpspec {

double Tridiag::radius_bound() const {
  double r = 0.0;
  const std::size_t n = diag.size();
  for (std::size_t i = 0; i < n; ++i) {
    double row = std::fabs(diag[i]);
    if (i > 0) row += std::fabs(off[i - 1]);
    if (i + 1 < n) row += std::fabs(off[i]);
    r = std::max(r, row);
  }
  return r;
}

TridiagLU::TridiagLU(const Tridiag& t, double shift) {
  const std::size_t n = t.size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "empty tridiagonal block");
  d_.resize(n);
  for (std::size_t i = 0; i < n; ++i) d_[i] = t.diag[i] - shift;
  du_.assign(t.off.begin(), t.off.end());
  dl_.assign(t.off.begin(), t.off.end());
  du2_.assign(n > 2 ? n - 2 : 0, 0.0);
  swapped_.assign(n > 1 ? n - 1 : 0, 0);

  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::fabs(d_[i]) >= std::fabs(dl_[i])) {
      if (d_[i] != 0.0) {
        const double fact = dl_[i] / d_[i];
        dl_[i] = fact;
        d_[i + 1] -= fact * du_[i];
      }
    } else {
      const double fact = d_[i] / dl_[i];
      d_[i] = dl_[i];
      dl_[i] = fact;
      const double temp = du_[i];
      du_[i] = d_[i + 1];
      d_[i + 1] = temp - fact * d_[i + 1];
      if (i + 2 < n) {
        du2_[i] = du_[i + 1];
        du_[i + 1] = -fact * du_[i + 1];
      }
      swapped_[i] = 1;
    }
  }
  min_pivot_ = std::numeric_limits<double>::infinity();
  for (double v : d_) min_pivot_ = std::min(min_pivot_, std::fabs(v));
}

void TridiagLU::solve(std::span<double> b) const {
  const std::size_t n = d_.size();
  if (b.size() != n) throw Error(ErrorKind::InvalidArgument, "rhs size mismatch");
  if (singular()) throw Error(ErrorKind::NearSingularEnergy, "exactly singular block");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (!swapped_[i]) {
      b[i + 1] -= dl_[i] * b[i];
    } else {
      const double temp = b[i];
      b[i] = b[i + 1];
      b[i + 1] = temp - dl_[i] * b[i];
    }
  }
  b[n - 1] /= d_[n - 1];
  if (n > 1) b[n - 2] = (b[n - 2] - du_[n - 2] * b[n - 1]) / d_[n - 2];
  for (std::size_t k = n; k-- > 2;) {
    const std::size_t i = k - 2;
    b[i] = (b[i] - du_[i] * b[i + 1] - du2_[i] * b[i + 2]) / d_[i];
  }
}

std::vector<double> TridiagLU::inverse_column(std::size_t col) const {
  std::vector<double> e(d_.size(), 0.0);
  e.at(col) = 1.0;
  solve(e);
  return e;
}

namespace {

double pivmin(const Tridiag& t) {
  double m = 1.0;
  for (double e : t.off) m = std::max(m, e * e);
  return std::numeric_limits<double>::min() * m;
}

}  // namespace

std::size_t sturm_count(const Tridiag& t, double x) {
  const std::size_t n = t.size();
  if (n == 0) return 0;
  const double pm = pivmin(t);
  std::size_t count = 0;
  double q = t.diag[0] - x;
  if (std::fabs(q) < pm) q = -pm;
  if (q < 0) ++count;
  for (std::size_t i = 1; i < n; ++i) {
    q = t.diag[i] - x - t.off[i - 1] * t.off[i - 1] / q;
    if (std::fabs(q) < pm) q = -pm;
    if (q < 0) ++count;
  }
  return count;
}

double eigenvalue_by_index(const Tridiag& t, std::size_t k) {
  if (k >= t.size()) throw Error(ErrorKind::InvalidArgument, "eigenvalue index out of range");
  const double r = t.radius_bound() + 1.0;
  double lo = -r, hi = r;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(t, mid) > k)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

double distance_to_spectrum(const Tridiag& t, double x) {
  const std::size_t c = sturm_count(t, x);
  double best = std::numeric_limits<double>::infinity();
  if (c > 0) best = std::min(best, std::fabs(x - eigenvalue_by_index(t, c - 1)));
  if (c < t.size()) best = std::min(best, std::fabs(eigenvalue_by_index(t, c) - x));
  return best;
}

RestrictedEigen eigen_restricted(const Tridiag& t, std::span<const std::size_t> rows) {
  const std::size_t n = t.size();
  std::vector<double> d(t.diag);
  std::vector<double> e(n, 0.0);
  std::copy(t.off.begin(), t.off.end(), e.begin());
  const std::size_t nr = rows.size();
  std::vector<std::vector<double>> z(nr, std::vector<double>(n, 0.0));
  for (std::size_t r = 0; r < nr; ++r) z[r].at(rows[r]) = 1.0;

  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (std::size_t l = 0; l < n; ++l) {
    int iter = 0;
    std::size_t m = l;
    do {
      for (m = l; m + 1 < n; ++m) {
        const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
        if (std::fabs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (++iter > 60) throw Error(ErrorKind::NoConvergence, "implicit QL did not converge");
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + std::copysign(r, g));
        double s = 1.0, c = 1.0, p = 0.0;
        bool deflated = false;
        for (std::size_t i = m; i-- > l;) {
          double f = s * e[i];
          const double b = c * e[i];
          r = std::hypot(f, g);
          e[i + 1] = r;
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            deflated = true;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          p = s * r;
          d[i + 1] = g + p;
          g = c * r - b;
          for (std::size_t k = 0; k < nr; ++k) {
            f = z[k][i + 1];
            z[k][i + 1] = s * z[k][i] + c * f;
            z[k][i] = c * z[k][i] - s * f;
          }
        }
        if (deflated) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  RestrictedEigen out;
  out.values.resize(n);
  out.components.assign(nr, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = d[order[j]];
    for (std::size_t r = 0; r < nr; ++r) out.components[r][j] = z[r][order[j]];
  }
  return out;
}

}  // namespace qpspec
