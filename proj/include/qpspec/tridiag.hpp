#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qpspec {

/// Symmetric tridiagonal matrix: diag has size n, off has size n-1.
struct Tridiag {
  std::vector<double> diag;
  std::vector<double> off;

  std::size_t size() const { return diag.size(); }
  /// Gershgorin bound on the spectral radius.
  double radius_bound() const;
};

/// LU factorization of (T - shift) with partial pivoting.
class TridiagLU {
 public:
  TridiagLU(const Tridiag& t, double shift);

  /// Solve (T - shift) x = b in place.
  void solve(std::span<double> b) const;
  /// Column b of the inverse.
  std::vector<double> inverse_column(std::size_t col) const;
  /// Smallest |pivot| met during elimination.
  double min_pivot() const { return min_pivot_; }
  bool singular() const { return min_pivot_ == 0.0; }
  std::size_t size() const { return d_.size(); }

 private:
  std::vector<double> d_, du_, du2_, dl_;
  std::vector<unsigned char> swapped_;
  double min_pivot_ = 0.0;
};

/// Number of eigenvalues of T strictly below x.
std::size_t sturm_count(const Tridiag& t, double x);

/// k-th smallest eigenvalue (0-based) by bisection.
double eigenvalue_by_index(const Tridiag& t, std::size_t k);

/// Distance from x to the nearest eigenvalue of T.
double distance_to_spectrum(const Tridiag& t, double x);

/// Eigenvalues of T together with the components of each eigenvector on the
/// requested rows. Uses implicit QL with Wilkinson shifts and only
/// accumulates the rotations on those rows, so memory is O(n * rows).
struct RestrictedEigen {
  std::vector<double> values;
  // components[r][j] = row rows[r] of eigenvector j
  std::vector<std::vector<double>> components;
};

RestrictedEigen eigen_restricted(const Tridiag& t, std::span<const std::size_t> rows);

}  // namespace qpspec
