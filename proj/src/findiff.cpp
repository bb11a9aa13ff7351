#include "diffopt/findiff.hpp"

#include <cmath>
#include <exception>
#include <string>

namespace diffopt {

Mat central_jacobian(const std::function<Vec(const Vec&)>& fun, const Vec& x, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step must be positive");
  Mat jac;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec plus = x;
    Vec minus = x;
    plus(j) += h;
    minus(j) -= h;
    Vec fp;
    Vec fm;
    try {
      fp = fun(plus);
      fm = fun(minus);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kEvaluationFailed,
                  "column " + std::to_string(j) + ": " + e.what());
    }
    if (j == 0) jac.resize(fp.size(), x.size());
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

GradCheckReport gradcheck(const Mat& analytic, const Mat& numeric, double rtol, double atol) {
  if (analytic.rows() != numeric.rows() || analytic.cols() != numeric.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradcheck shapes differ");
  }
  GradCheckReport report;
  for (Eigen::Index j = 0; j < analytic.cols(); ++j) {
    for (Eigen::Index i = 0; i < analytic.rows(); ++i) {
      const double abs_err = std::abs(analytic(i, j) - numeric(i, j));
      const double rel_err = abs_err / std::max(1.0, std::abs(numeric(i, j)));
      if (!(rel_err <= report.max_rel_err)) {
        report.max_rel_err = rel_err;
        report.worst_index = {i, j};
      }
      report.max_abs_err = std::max(report.max_abs_err, abs_err);
    }
  }
  report.pass = report.max_rel_err <= rtol || report.max_abs_err <= atol;
  return report;
}

OracleAudit audit_oracle(const SmoothFunction& f, const Vec& x, const Vec& y, double h) {
  OracleAudit audit;
  const Mat grad_fd = central_jacobian(
      [&](const Vec& yy) { return Vec::Constant(1, f.eval(x, yy)); }, y, h);
  audit.grad_y = gradcheck(Mat(f.grad_y(x, y).transpose()), grad_fd, 1e-5);
  const Mat hess = f.hess_yy(x, y);
  audit.hess_yy = gradcheck(hess, central_jacobian([&](const Vec& yy) { return f.grad_y(x, yy); },
                                                   y, h),
                            1e-4);
  audit.cross_xy = gradcheck(
      f.cross_xy(x, y), central_jacobian([&](const Vec& xx) { return f.grad_y(xx, y); }, x, h),
      1e-4);
  audit.asymmetry = max_abs(hess - hess.transpose());
  return audit;
}

}  // namespace diffopt
