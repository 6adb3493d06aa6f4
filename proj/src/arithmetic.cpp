#include "qpspec/arithmetic.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qpspec/error.hpp"

namespace qpspec::arithmetic {

namespace {

// Owning MPFR value with an explicit precision in bits.
class BigFloat {
 public:
  explicit BigFloat(unsigned bits) { mpfr_init2(v_, static_cast<mpfr_prec_t>(bits)); }
  BigFloat(const BigFloat&) = delete;
  BigFloat& operator=(const BigFloat&) = delete;
  ~BigFloat() { mpfr_clear(v_); }

  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }

 private:
  mpfr_t v_;
};

mpz_srcptr z(const BigInt& x) { return x.backend().data(); }

double log2_abs(const BigInt& x) {
  if (x == 0) return -std::numeric_limits<double>::infinity();
  long exp = 0;
  const double mant = mpz_get_d_2exp(&exp, z(x));
  return std::log2(std::fabs(mant)) + static_cast<double>(exp);
}

double ln_big(const BigInt& x) { return log2_abs(x) * std::log(2.0); }

std::string to_decimal(mpfr_srcptr x, unsigned bits) {
  const auto digits = static_cast<std::size_t>(std::ceil(bits * std::log10(2.0))) + 2;
  mpfr_exp_t exp = 0;
  char* raw = mpfr_get_str(nullptr, &exp, 10, digits, x, MPFR_RNDN);
  std::string mant(raw);
  mpfr_free_str(raw);
  bool negative = false;
  if (!mant.empty() && mant[0] == '-') {
    negative = true;
    mant.erase(0, 1);
  }
  std::string out = negative ? "-" : "";
  if (exp <= 0) {
    out += "0." + std::string(static_cast<std::size_t>(-exp), '0') + mant;
  } else if (static_cast<std::size_t>(exp) >= mant.size()) {
    out += mant + std::string(static_cast<std::size_t>(exp) - mant.size(), '0');
  } else {
    out += mant.substr(0, static_cast<std::size_t>(exp)) + "." +
           mant.substr(static_cast<std::size_t>(exp));
  }
  return out;
}

void set_double_double(CFExpansion& cf, mpfr_srcptr alpha, unsigned bits) {
  cf.alpha_hi = mpfr_get_d(alpha, MPFR_RNDN);
  BigFloat rest(bits);
  mpfr_sub_d(rest.get(), alpha, cf.alpha_hi, MPFR_RNDN);
  cf.alpha_lo = mpfr_get_d(rest.get(), MPFR_RNDN);
}

void fill_convergents(CFExpansion& cf) {
  cf.convergents.clear();
  cf.convergents.reserve(cf.partial_quotients.size() + 1);
  BigInt p_prev = 1, q_prev = 0, p = 0, q = 1;
  cf.convergents.push_back({p, q});
  for (const auto& a : cf.partial_quotients) {
    BigInt p_next = a * p + p_prev;
    BigInt q_next = a * q + q_prev;
    p_prev = std::move(p);
    q_prev = std::move(q);
    p = std::move(p_next);
    q = std::move(q_next);
    cf.convergents.push_back({p, q});
  }
  cf.beta_sequence.clear();
  for (std::size_t n = 0; n + 1 < cf.convergents.size(); ++n) {
    cf.beta_sequence.push_back(ln_big(cf.convergents[n + 1].q) /
                               cf.convergents[n].q.convert_to<double>());
  }
}

}  // namespace

const BigInt& CFExpansion::q(std::size_t n) const {
  if (n >= convergents.size())
    throw Error(ErrorKind::DepthError, "q_" + std::to_string(n) + " beyond stored depth");
  return convergents[n].q;
}

const BigInt& CFExpansion::p(std::size_t n) const {
  if (n >= convergents.size())
    throw Error(ErrorKind::DepthError, "p_" + std::to_string(n) + " beyond stored depth");
  return convergents[n].p;
}

std::int64_t CFExpansion::q_small(std::size_t n) const {
  const BigInt& value = q(n);
  if (value > std::numeric_limits<std::int64_t>::max())
    throw Error(ErrorKind::DepthError, "q_" + std::to_string(n) + " exceeds 64-bit range");
  return value.convert_to<std::int64_t>();
}

CFExpansion continued_fraction(const std::string& alpha_decimal, std::size_t n_max,
                               unsigned precision_bits) {
  if (precision_bits < 24)
    throw Error(ErrorKind::InvalidArgument, "precision_bits must be >= 24");
  BigFloat x(precision_bits);
  if (mpfr_set_str(x.get(), alpha_decimal.c_str(), 10, MPFR_RNDN) != 0 &&
      !mpfr_number_p(x.get()))
    throw Error(ErrorKind::InvalidArgument, "cannot parse alpha '" + alpha_decimal + "'");
  if (mpfr_cmp_ui(x.get(), 0) <= 0 || mpfr_cmp_ui(x.get(), 1) >= 0)
    throw Error(ErrorKind::InvalidArgument, "alpha must lie in (0,1)");

  CFExpansion cf;
  cf.precision_bits = precision_bits;
  cf.alpha_decimal = to_decimal(x.get(), precision_bits);
  set_double_double(cf, x.get(), precision_bits);

  BigFloat y(precision_bits);
  BigInt q_prev = 0, q = 1;
  const double bits = static_cast<double>(precision_bits);
  while (cf.partial_quotients.size() < n_max) {
    // The remainder carries an absolute error of about q^2 2^-bits.
    const double noise_log2 = 2.0 * log2_abs(q) - bits;
    if (noise_log2 + 8.0 >= 0.0) break;
    long x_exp = 0;
    const double x_mant = mpfr_zero_p(x.get()) ? 0.0 : mpfr_get_d_2exp(&x_exp, x.get(), MPFR_RNDN);
    if (x_mant == 0.0 || std::log2(x_mant) + static_cast<double>(x_exp) < noise_log2 + 4.0)
      throw Error(ErrorKind::RationalInput,
                  "Euclidean iteration terminated after " +
                      std::to_string(cf.partial_quotients.size()) + " quotients");
    mpfr_ui_div(y.get(), 1, x.get(), MPFR_RNDN);
    mpfr_floor(x.get(), y.get());
    BigInt a;
    mpfr_get_z(a.backend().data(), x.get(), MPFR_RNDD);
    mpfr_sub(x.get(), y.get(), x.get(), MPFR_RNDN);
    BigInt q_next = a * q + q_prev;
    q_prev = std::move(q);
    q = std::move(q_next);
    cf.partial_quotients.push_back(std::move(a));
  }
  if (cf.partial_quotients.size() < 3)
    throw Error(ErrorKind::PrecisionExhausted,
                "only " + std::to_string(cf.partial_quotients.size()) +
                    " quotients resolvable at " + std::to_string(precision_bits) + " bits");
  cf.truncated = cf.partial_quotients.size() < n_max;
  fill_convergents(cf);
  return cf;
}

std::string named_frequency_decimal(const std::string& name, unsigned precision_bits) {
  BigFloat v(precision_bits);
  if (name == "golden") {
    mpfr_sqrt_ui(v.get(), 5, MPFR_RNDN);
    mpfr_sub_ui(v.get(), v.get(), 1, MPFR_RNDN);
    mpfr_div_ui(v.get(), v.get(), 2, MPFR_RNDN);
  } else if (name == "sqrt2") {
    mpfr_sqrt_ui(v.get(), 2, MPFR_RNDN);
    mpfr_sub_ui(v.get(), v.get(), 1, MPFR_RNDN);
  } else if (name == "pi") {
    mpfr_const_pi(v.get(), MPFR_RNDN);
    mpfr_sub_ui(v.get(), v.get(), 3, MPFR_RNDN);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown named frequency '" + name + "'");
  }
  return to_decimal(v.get(), precision_bits);
}

BetaEstimate beta_estimate(const CFExpansion& cf) {
  if (cf.convergents.size() < 3)
    throw Error(ErrorKind::InsufficientDepth, "beta estimate needs at least 3 convergents");
  BetaEstimate est;
  est.sequence = cf.beta_sequence;
  const std::size_t count = est.sequence.size();
  const std::size_t tail = (count + 1) / 2;
  est.beta_hat = *std::max_element(est.sequence.end() - static_cast<std::ptrdiff_t>(tail),
                                   est.sequence.end());
  return est;
}

CFExpansion build_liouville_frequency(double beta_target, std::size_t n_terms,
                                      std::span<const std::int64_t> seed,
                                      unsigned precision_bits) {
  if (!(beta_target > 0.0))
    throw Error(ErrorKind::GuardBetaZero, "Liouville construction requires beta > 0");
  if (beta_target > 5.0) throw Error(ErrorKind::InvalidArgument, "beta_target must be <= 5");
  if (n_terms < 4) throw Error(ErrorKind::InvalidArgument, "n_terms must be >= 4");

  static constexpr std::int64_t kDefaultSeed[] = {2, 2};
  if (seed.empty()) seed = kDefaultSeed;
  if (seed.size() >= n_terms)
    throw Error(ErrorKind::InvalidArgument, "seed must be shorter than n_terms");

  CFExpansion cf;
  BigInt q_prev = 0, q = 1;
  for (const auto a : seed) {
    if (a < 1) throw Error(ErrorKind::InvalidArgument, "seed quotients must be positive");
    cf.partial_quotients.emplace_back(a);
    BigInt q_next = BigInt(a) * q + q_prev;
    q_prev = std::move(q);
    q = std::move(q_next);
  }

  const double budget_nats = kDenominatorBudgetBits * std::log(2.0);
  while (cf.partial_quotients.size() < n_terms) {
    // ln q_next ~ beta q; refuse anything beyond the integer budget.
    if (BigInt(static_cast<std::int64_t>(budget_nats / beta_target)) < q) {
      cf.overflow = true;
      break;
    }
    const double qd = q.convert_to<double>();
    const auto bits = static_cast<unsigned>(beta_target * qd / std::log(2.0)) + 128;
    BigFloat e(bits);
    mpfr_set_d(e.get(), beta_target, MPFR_RNDN);
    mpfr_mul_z(e.get(), e.get(), z(q), MPFR_RNDN);
    mpfr_exp(e.get(), e.get(), MPFR_RNDN);
    mpfr_div_z(e.get(), e.get(), z(q), MPFR_RNDN);
    BigInt a;
    mpfr_get_z(a.backend().data(), e.get(), MPFR_RNDU);
    if (a < 1) a = 1;
    BigInt q_next = a * q + q_prev;
    if (log2_abs(q_next) > kDenominatorBudgetBits) {
      cf.overflow = true;
      break;
    }
    q_prev = std::move(q);
    q = std::move(q_next);
    cf.partial_quotients.push_back(std::move(a));
  }
  cf.truncated = cf.overflow;

  // alpha = [0; a_1, ..., a_N, 1, 1, 1, ...]
  const unsigned bits =
      std::max<unsigned>(precision_bits, static_cast<unsigned>(2.0 * log2_abs(q)) + 128);
  cf.precision_bits = bits;
  BigFloat t(bits);
  mpfr_sqrt_ui(t.get(), 5, MPFR_RNDN);
  mpfr_sub_ui(t.get(), t.get(), 1, MPFR_RNDN);
  mpfr_div_ui(t.get(), t.get(), 2, MPFR_RNDN);
  for (auto it = cf.partial_quotients.rbegin(); it != cf.partial_quotients.rend(); ++it) {
    mpfr_add_z(t.get(), t.get(), z(*it), MPFR_RNDN);
    mpfr_ui_div(t.get(), 1, t.get(), MPFR_RNDN);
  }
  cf.alpha_decimal = to_decimal(t.get(), bits);
  set_double_double(cf, t.get(), bits);
  fill_convergents(cf);
  return cf;
}

CFExpansion parse_frequency(const std::string& spec, std::size_t depth, unsigned precision_bits) {
  if (spec == "golden" || spec == "sqrt2" || spec == "pi")
    return continued_fraction(named_frequency_decimal(spec, precision_bits), depth,
                              precision_bits);
  if (spec.rfind("liouville:", 0) == 0) {
    std::istringstream in(spec.substr(10));
    double beta = 0.0;
    char sep = 0;
    std::size_t terms = 0;
    if (!(in >> beta >> sep >> terms) || sep != ':')
      throw Error(ErrorKind::InvalidArgument, "expected liouville:<beta>:<terms>");
    return build_liouville_frequency(beta, terms, {}, precision_bits);
  }
  return continued_fraction(spec, depth, precision_bits);
}

ResonanceScales resonance_scales(std::span<const std::int64_t> denominators, std::size_t n,
                                 double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw Error(ErrorKind::InvalidArgument, "tau must lie in (0, 1)");
  if (n >= denominators.size())
    throw Error(ErrorKind::DepthError, "index n beyond stored convergents");
  ResonanceScales rs;
  rs.n = n;
  rs.tau = tau;
  rs.q_n = denominators[n];
  const double scaled = tau * static_cast<double>(rs.q_n);
  rs.b_n = static_cast<std::int64_t>(std::floor(scaled));
  for (std::size_t n0 = 1; n0 <= n; ++n0) {
    if (static_cast<double>(denominators[n - n0]) <= scaled) {
      rs.n_0 = n0;
      break;
    }
  }
  if (rs.n_0 == 0)
    throw Error(ErrorKind::DepthError, "no n_0 with q_{n-n_0} <= tau q_n within stored depth");
  rs.q_n_minus_n0 = denominators[n - rs.n_0];
  rs.s = static_cast<std::int64_t>(std::floor(scaled / (2.0 * rs.q_n_minus_n0)));
  if (rs.s < 1)
    throw Error(ErrorKind::DegenerateS,
                "2 s q_{n-n_0} <= tau q_n has no solution s >= 1 (q_n=" +
                    std::to_string(rs.q_n) + ", q_{n-n_0}=" + std::to_string(rs.q_n_minus_n0) +
                    ")");
  rs.s_prime = rs.s / 10;
  return rs;
}

ResonanceScales resonance_scales(const CFExpansion& cf, std::size_t n, double tau) {
  std::vector<std::int64_t> qs;
  for (std::size_t k = 0; k <= n; ++k) qs.push_back(cf.q_small(k));
  return resonance_scales(qs, n, tau);
}

Resonance classify_resonant(std::int64_t k, std::int64_t q_n, std::int64_t b_n,
                            std::int64_t window) {
  if (q_n < 1) throw Error(ErrorKind::InvalidArgument, "q_n must be positive");
  if (k > window || k < -window)
    throw Error(ErrorKind::OutOfWindow, "|k| exceeds q_{n+1}");
  // nearest multiple of q_n; floor division on (2k + q) / 2q
  const std::int64_t num = 2 * k + q_n;
  const std::int64_t den = 2 * q_n;
  std::int64_t l = num / den;
  if ((num % den != 0) && (num < 0)) --l;
  const std::int64_t dist = k - l * q_n;
  if (dist <= b_n && dist >= -b_n) return Resonant{l};
  return Nonresonant{};
}

Resonance classify_resonant(std::int64_t k, const CFExpansion& cf, std::size_t n, double tau) {
  const std::int64_t q_n = cf.q_small(n);
  std::int64_t window = std::numeric_limits<std::int64_t>::max();
  if (n + 1 < cf.convergents.size() &&
      cf.q(n + 1) <= std::numeric_limits<std::int64_t>::max())
    window = cf.q_small(n + 1);
  const auto b_n = static_cast<std::int64_t>(std::floor(tau * static_cast<double>(q_n)));
  return classify_resonant(k, q_n, b_n, window);
}

namespace {

nlohmann::json big_to_json(const BigInt& v) {
  if (v <= std::numeric_limits<std::int64_t>::max()) return v.convert_to<std::int64_t>();
  return v.str();
}

BigInt big_from_json(const nlohmann::json& j) {
  if (j.is_string()) return BigInt(j.get<std::string>());
  if (j.is_number_integer()) return BigInt(j.get<std::int64_t>());
  throw Error(ErrorKind::ConfigError, "expected integer or decimal string");
}

}  // namespace

nlohmann::json to_json(const CFExpansion& cf) {
  nlohmann::json quotients = nlohmann::json::array();
  for (const auto& a : cf.partial_quotients) quotients.push_back(big_to_json(a));
  nlohmann::json convergents = nlohmann::json::array();
  for (const auto& c : cf.convergents)
    convergents.push_back(nlohmann::json::array({big_to_json(c.p), big_to_json(c.q)}));
  return {{"alpha_decimal", cf.alpha_decimal},
          {"quotients", quotients},
          {"convergents", convergents},
          {"precision_bits", cf.precision_bits},
          {"truncated", cf.truncated},
          {"overflow", cf.overflow}};
}

CFExpansion cf_from_json(const nlohmann::json& j, unsigned precision_bits) {
  try {
    CFExpansion cf;
    cf.alpha_decimal = j.at("alpha_decimal").get<std::string>();
    cf.precision_bits = precision_bits != 0 ? precision_bits
                                            : j.value("precision_bits", kDefaultPrecisionBits);
    for (const auto& a : j.at("quotients")) cf.partial_quotients.push_back(big_from_json(a));
    cf.truncated = j.value("truncated", false);
    cf.overflow = j.value("overflow", false);
    BigFloat x(cf.precision_bits);
    mpfr_set_str(x.get(), cf.alpha_decimal.c_str(), 10, MPFR_RNDN);
    set_double_double(cf, x.get(), cf.precision_bits);
    fill_convergents(cf);
    if (j.contains("convergents")) {
      const auto& stored = j.at("convergents");
      if (stored.size() != cf.convergents.size())
        throw Error(ErrorKind::ConfigError, "convergents length disagrees with quotients");
      for (std::size_t n = 0; n < stored.size(); ++n) {
        if (big_from_json(stored[n][0]) != cf.convergents[n].p ||
            big_from_json(stored[n][1]) != cf.convergents[n].q)
          throw Error(ErrorKind::ConfigError,
                      "stored convergent " + std::to_string(n) + " violates the recurrence");
      }
    }
    return cf;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

}  // namespace qpspec::arithmetic
