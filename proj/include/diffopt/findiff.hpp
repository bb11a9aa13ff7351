#pragma once

#include <functional>
#include <utility>

#include "diffopt/problem.hpp"

namespace diffopt {

inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdRtol = 1e-5;
inline constexpr double kFdAtol = 1e-8;

/// Column j = (fun(x + h e_j) - fun(x - h e_j)) / (2h).
Mat central_jacobian(const std::function<Vec(const Vec&)>& fun, const Vec& x, double h = kFdStep);

struct GradCheckReport {
  double max_abs_err = 0.0;
  // |analytic - numeric| / max(1, |numeric|)
  double max_rel_err = 0.0;
  std::pair<Eigen::Index, Eigen::Index> worst_index{0, 0};
  bool pass = true;
};

GradCheckReport gradcheck(const Mat& analytic, const Mat& numeric, double rtol = kFdRtol,
                          double atol = kFdAtol);

struct OracleAudit {
  GradCheckReport grad_y;
  GradCheckReport hess_yy;
  GradCheckReport cross_xy;
  double asymmetry = 0.0;
  bool pass() const { return grad_y.pass && hess_yy.pass && cross_xy.pass && asymmetry <= 1e-10; }
};

/// Checks an oracle's analytic derivatives against central differences at (x, y).
OracleAudit audit_oracle(const SmoothFunction& f, const Vec& x, const Vec& y, double h = kFdStep);

}  // namespace diffopt
