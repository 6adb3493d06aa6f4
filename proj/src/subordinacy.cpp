#include "qpspec/subordinacy.hpp"

#include <cmath>

#include "qpspec/error.hpp"
#include "qpspec/spectral.hpp"

namespace qpspec::dynamics {

SubordinacySample subordinacy_ratio(const model::OperatorPoint& op, double E, double theta,
                                    double eps, Side sign) {
  SubordinacySample s;
  s.eps = eps;
  s.sign = sign;
  s.L = length_scale(op, E, eps, sign);
  const auto F = static_cast<std::int64_t>(std::floor(s.L)) + 2;
  const auto u = solve_theta(op, E, theta, -F, F);
  s.b = std::exp(2.0 * log_truncated_norm(u, s.L, sign));
  s.im_m = spectral::half_line_m(op, {E, eps}, theta, sign, 1e-8).value.imag();
  s.rho = s.im_m * eps * s.b;
  return s;
}

VerificationReport subordinacy_check(const model::OperatorPoint& op, double E, double theta,
                                     std::span<const double> eps_grid, double C_max) {
  VerificationReport r;
  r.check_name = "subordinacy";
  r.parameters = {{"E", E}, {"theta", theta}, {"C_max", C_max},
                  {"eps", std::vector<double>(eps_grid.begin(), eps_grid.end())}};
  if (eps_grid.empty()) throw Error(ErrorKind::InvalidArgument, "empty eps grid");
  double min_rho = std::numeric_limits<double>::infinity();
  nlohmann::json rows = nlohmann::json::array();
  for (double eps : eps_grid) {
    for (Side sign : {Side::Plus, Side::Minus}) {
      const auto s = subordinacy_ratio(op, E, theta, eps, sign);
      rows.push_back({{"eps", eps}, {"side", std::string(to_string(sign))}, {"L", s.L},
                      {"b", s.b}, {"im_m", s.im_m}, {"rho", s.rho}});
      min_rho = std::min(min_rho, s.rho);
      ++r.samples;
    }
  }
  r.parameters["rows"] = rows;
  const double C_fit = 1.0 / min_rho;
  r.parameters["C_fit"] = C_fit;
  r.notes = "C_fit = " + std::to_string(C_fit);
  // margin in log units: log C_max - log C_fit
  r.conclude(min_rho > 0.0 ? std::log(C_max) + std::log(min_rho)
                           : -std::numeric_limits<double>::infinity());
  return r;
}

}  // namespace qpspec::dynamics
