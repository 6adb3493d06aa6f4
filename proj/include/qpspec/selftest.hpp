#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qpspec::selftest {

struct FamilyResult {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  std::size_t samples = 0;
  // draws rejected (near-singular blocks, cancellation) and redrawn
  std::size_t redrawn = 0;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

struct Options {
  // per-family sample counts; 0 keeps the family default
  std::size_t samples = 0;
  std::uint64_t seed = 7;
};

/// W(n) - W(0) for u_theta, u_{theta+pi/2} at random (E, theta, |n| <= 1e4); default 1000 draws.
FamilyResult wronskian(const Options& opt = {});
/// Green expansion identity on random blocks up to 200 sites; default 1000 draws.
FamilyResult expansion(const Options& opt = {});
/// omega^2 from the extremal norms against det(Gram); default 200 draws.
FamilyResult gram(const Options& opt = {});
/// Free half-line m against the quadratic root with Im z in [1e-3, 1]; default 50 points.
FamilyResult m_free(const Options& opt = {});
/// Full-line combination formula against the direct resolvent at Im z = 1e-2; default 20 points.
FamilyResult m_combination(const Options& opt = {});
/// Total mass of the finite-volume spectral measure equals 2.
FamilyResult parseval(const Options& opt = {});

std::vector<std::string> family_names();

/// Families whose name contains `filter` (all when empty).
std::vector<FamilyResult> run(std::string_view filter = {}, const Options& opt = {});

std::string summary_line(const FamilyResult& r);

}  // namespace qpspec::selftest
