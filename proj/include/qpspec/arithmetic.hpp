#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <boost/multiprecision/gmp.hpp>
#include <json.hpp>

namespace qpspec::arithmetic {

using BigInt = boost::multiprecision::mpz_int;

// Largest denominator the Liouville factory will construct, in bits.
inline constexpr unsigned kDenominatorBudgetBits = 65536;
inline constexpr unsigned kDefaultPrecisionBits = 256;

struct Convergent {
  BigInt p;
  BigInt q;
};

/// Continued-fraction data of a frequency alpha in (0,1).
///
/// Indexing follows the usual convention: a_0 = 0 is implicit,
/// partial_quotients[k-1] = a_k, convergents[n] = p_n/q_n for n = 0..N with
/// (p_0, q_0) = (0, 1) and q_1 = a_1. beta_sequence[n] = ln(q_{n+1})/q_n for
/// n = 0..N-1.
struct CFExpansion {
  std::string alpha_decimal;
  unsigned precision_bits = kDefaultPrecisionBits;
  // alpha ~= alpha_hi + alpha_lo (double-double), used for lattice phases
  double alpha_hi = 0.0;
  double alpha_lo = 0.0;
  std::vector<BigInt> partial_quotients;
  std::vector<Convergent> convergents;
  std::vector<double> beta_sequence;
  // stopped before the requested depth (precision or integer budget)
  bool truncated = false;
  bool overflow = false;

  std::size_t depth() const { return partial_quotients.size(); }
  const BigInt& q(std::size_t n) const;
  const BigInt& p(std::size_t n) const;
  /// q_n as a 64-bit integer; throws DepthError when out of range or too large.
  std::int64_t q_small(std::size_t n) const;
  /// alpha as a double (alpha_hi + alpha_lo rounded).
  double alpha() const { return alpha_hi + alpha_lo; }
};

/// Expand alpha (decimal string, parsed at precision_bits) into n_max
/// partial quotients, stopping early when the working precision can no
/// longer resolve the next quotient.
CFExpansion continued_fraction(const std::string& alpha_decimal, std::size_t n_max,
                               unsigned precision_bits = kDefaultPrecisionBits);

/// Named frequencies: "golden" = (sqrt5-1)/2, "sqrt2" = sqrt2-1, "pi" = pi-3.
std::string named_frequency_decimal(const std::string& name, unsigned precision_bits);

struct BetaEstimate {
  double beta_hat = 0.0;
  std::vector<double> sequence;
};

BetaEstimate beta_estimate(const CFExpansion& cf);

/// Build a frequency whose quotients satisfy a_{n+1} = ceil(e^{beta q_n}/q_n)
/// after the seed, so that ln q_{n+1}/q_n -> beta_target. When the next q
/// would exceed kDenominatorBudgetBits the expansion stops with overflow set.
/// The tail beyond the last constructed quotient is the golden-mean tail.
CFExpansion build_liouville_frequency(double beta_target, std::size_t n_terms,
                                      std::span<const std::int64_t> seed = {},
                                      unsigned precision_bits = kDefaultPrecisionBits);

/// Resolve "golden", "sqrt2", "pi", "liouville:<beta>:<terms>" or a decimal.
CFExpansion parse_frequency(const std::string& spec, std::size_t depth = 40,
                            unsigned precision_bits = kDefaultPrecisionBits);

struct ResonanceScales {
  std::size_t n = 0;
  double tau = 0.1;
  std::int64_t b_n = 0;
  std::size_t n_0 = 0;
  std::int64_t s = 0;
  std::int64_t s_prime = 0;
  std::int64_t q_n = 0;
  std::int64_t q_n_minus_n0 = 0;
};

/// Scales for the resonance analysis at index n. `denominators` is q_0..q_M.
ResonanceScales resonance_scales(std::span<const std::int64_t> denominators, std::size_t n,
                                 double tau = 0.1);
ResonanceScales resonance_scales(const CFExpansion& cf, std::size_t n, double tau = 0.1);

struct Nonresonant {};
struct Resonant {
  std::int64_t l = 0;
};
using Resonance = std::variant<Resonant, Nonresonant>;

/// Low-level form: k is n-resonant iff |k - l q_n| <= b_n for some l.
/// `window` is the admissible range |k| <= window (q_{n+1}).
Resonance classify_resonant(std::int64_t k, std::int64_t q_n, std::int64_t b_n,
                            std::int64_t window);
Resonance classify_resonant(std::int64_t k, const CFExpansion& cf, std::size_t n,
                            double tau = 0.1);

nlohmann::json to_json(const CFExpansion& cf);
CFExpansion cf_from_json(const nlohmann::json& j, unsigned precision_bits = 0);

}  // namespace qpspec::arithmetic
