#pragma once

#include <span>
#include <vector>

#include "qpspec/dynamics.hpp"
#include "qpspec/report.hpp"

namespace qpspec::dynamics {

struct SubordinacySample {
  double eps = 0.0;
  Side sign = Side::Plus;
  double L = 0.0;
  double b = 0.0;
  double im_m = 0.0;
  double rho = 0.0;
};

/// rho(eps) = Im m_theta(E + i eps) * eps * ||u_theta||_{L(eps)}^2 on one side.
SubordinacySample subordinacy_ratio(const model::OperatorPoint& op, double E, double theta,
                                    double eps, Side sign);

/// rho over the grid on both half-lines; C_fit = 1 / min rho, pass iff C_fit <= C_max.
VerificationReport subordinacy_check(const model::OperatorPoint& op, double E, double theta,
                                     std::span<const double> eps_grid, double C_max = 100.0);

}  // namespace qpspec::dynamics
