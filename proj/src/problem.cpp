#include "diffopt/problem.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>

namespace diffopt {

void EqualityConstraint::validate(double rank_tol) const {
  if (a.rows() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "equality constraint A rows vs b length");
  }
  if (a.rows() == 0) return;
  if (a.rows() > a.cols()) {
    throw Error(ErrorCode::kRankDeficient, "more equality constraints than variables");
  }
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (!(sv(i) > rank_tol * sv(0))) {
      throw Error(ErrorCode::kRankDeficient, "A is not full row rank");
    }
  }
}

double EqualityConstraint::violation(const Vec& y) const {
  if (a.rows() == 0) return 0.0;
  return max_abs(a * y - b);
}

SmoothFunction minimization_form(const ObjectiveOracle& oracle) {
  if (oracle.sense == Sense::kMinimize) return oracle;
  return negated(oracle);
}

ObjectiveOracle negated(const ObjectiveOracle& oracle) {
  ObjectiveOracle out;
  out.sense = oracle.sense == Sense::kMinimize ? Sense::kMaximize : Sense::kMinimize;
  out.eval = [f = oracle.eval](const Vec& x, const Vec& y) { return -f(x, y); };
  out.grad_y = [f = oracle.grad_y](const Vec& x, const Vec& y) -> Vec { return -f(x, y); };
  out.hess_yy = [f = oracle.hess_yy](const Vec& x, const Vec& y) -> Mat { return -f(x, y); };
  out.cross_xy = [f = oracle.cross_xy](const Vec& x, const Vec& y) -> Mat { return -f(x, y); };
  if (oracle.grad_x) {
    out.grad_x = [f = oracle.grad_x](const Vec& x, const Vec& y) -> Vec { return -f(x, y); };
  }
  return out;
}

namespace {

// h(f) for a scalar map h with derivatives h1 = h', h2 = h''.
struct ScalarMap {
  std::function<double(double)> h;
  std::function<double(double)> h1;
  std::function<double(double)> h2;
};

ObjectiveOracle compose(const ObjectiveOracle& f, ScalarMap map) {
  if (!f.grad_x) {
    throw Error(ErrorCode::kInvalidArgument, "monotone composition needs grad_x");
  }
  ObjectiveOracle out;
  out.sense = f.sense;
  out.eval = [f, map](const Vec& x, const Vec& y) { return map.h(f.eval(x, y)); };
  out.grad_y = [f, map](const Vec& x, const Vec& y) -> Vec {
    return map.h1(f.eval(x, y)) * f.grad_y(x, y);
  };
  out.grad_x = [f, map](const Vec& x, const Vec& y) -> Vec {
    return map.h1(f.eval(x, y)) * f.grad_x(x, y);
  };
  out.hess_yy = [f, map](const Vec& x, const Vec& y) -> Mat {
    const double v = f.eval(x, y);
    const Vec gy = f.grad_y(x, y);
    return map.h1(v) * f.hess_yy(x, y) + map.h2(v) * gy * gy.transpose();
  };
  out.cross_xy = [f, map](const Vec& x, const Vec& y) -> Mat {
    const double v = f.eval(x, y);
    return map.h1(v) * f.cross_xy(x, y) + map.h2(v) * f.grad_y(x, y) * f.grad_x(x, y).transpose();
  };
  return out;
}

}  // namespace

ObjectiveOracle compose_exp(const ObjectiveOracle& oracle) {
  auto e = [](double v) { return std::exp(v); };
  return compose(oracle, {e, e, e});
}

ObjectiveOracle compose_log(const ObjectiveOracle& oracle, double shift) {
  return compose(oracle, {[shift](double v) { return std::log(v + shift); },
                          [shift](double v) { return 1.0 / (v + shift); },
                          [shift](double v) { return -1.0 / ((v + shift) * (v + shift)); }});
}

ObjectiveOracle make_quadratic_oracle(const Vec& weights, TargetMap targets) {
  require_finite(weights, "weights");
  ObjectiveOracle out;
  auto t = std::make_shared<TargetMap>(std::move(targets));
  out.eval = [w = weights, t](const Vec& x, const Vec& y) {
    const Mat h = t->values(x);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      sum += w(i) * (h.row(i).transpose() - y).squaredNorm();
    }
    return sum;
  };
  out.grad_y = [w = weights, t](const Vec& x, const Vec& y) -> Vec {
    const Mat h = t->values(x);
    Vec g = Vec::Zero(y.size());
    for (Eigen::Index i = 0; i < h.rows(); ++i) g -= 2.0 * w(i) * (h.row(i).transpose() - y);
    return g;
  };
  out.hess_yy = [w = weights](const Vec&, const Vec& y) -> Mat {
    return 2.0 * w.sum() * Mat::Identity(y.size(), y.size());
  };
  out.cross_xy = [w = weights, t](const Vec& x, const Vec& y) -> Mat {
    const Mat jac = t->jacobian(x);
    const Eigen::Index n = y.size();
    Mat c = Mat::Zero(n, x.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) c -= 2.0 * w(i) * jac.middleRows(i * n, n);
    return c;
  };
  out.grad_x = [w = weights, t](const Vec& x, const Vec& y) -> Vec {
    const Mat h = t->values(x);
    const Mat jac = t->jacobian(x);
    const Eigen::Index n = y.size();
    Vec g = Vec::Zero(x.size());
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      g += 2.0 * w(i) * jac.middleRows(i * n, n).transpose() * (h.row(i).transpose() - y);
    }
    return g;
  };
  return out;
}

TargetMap affine_scalar_targets(const Vec& slopes, const Vec& offsets) {
  if (slopes.size() != offsets.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "slopes vs offsets");
  }
  TargetMap t;
  t.values = [slopes, offsets](const Vec& x) -> Mat { return slopes * x(0) + offsets; };
  t.jacobian = [slopes](const Vec&) -> Mat { return slopes; };
  return t;
}

double max_constraint(const std::vector<InequalityConstraint>& constraints, const Vec& x,
                      const Vec& y) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& c : constraints) worst = std::max(worst, c.eval(x, y));
  return worst;
}

SmoothFunction barrier_function(const ObjectiveOracle& objective,
                                const std::vector<InequalityConstraint>& constraints, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "barrier parameter must be positive");
  const SmoothFunction f0 = minimization_form(objective);
  SmoothFunction out;
  out.eval = [f0, constraints, t](const Vec& x, const Vec& y) {
    double v = t * f0.eval(x, y);
    for (const auto& c : constraints) {
      const double fi = c.eval(x, y);
      if (!(fi < 0.0)) return std::numeric_limits<double>::infinity();
      v -= std::log(-fi);
    }
    return v;
  };
  // d/dy [-log(-f)] = -grad f / f
  out.grad_y = [f0, constraints, t](const Vec& x, const Vec& y) -> Vec {
    Vec g = t * f0.grad_y(x, y);
    for (const auto& c : constraints) g -= c.grad_y(x, y) / c.eval(x, y);
    return g;
  };
  // d2/dy2 [-log(-f)] = grad f grad f^T / f^2 - hess f / f
  out.hess_yy = [f0, constraints, t](const Vec& x, const Vec& y) -> Mat {
    Mat h = t * f0.hess_yy(x, y);
    for (const auto& c : constraints) {
      const double fi = c.eval(x, y);
      const Vec gi = c.grad_y(x, y);
      h += gi * gi.transpose() / (fi * fi) - c.hess_yy(x, y) / fi;
    }
    return h;
  };
  out.cross_xy = [f0, constraints, t](const Vec& x, const Vec& y) -> Mat {
    Mat cross = t * f0.cross_xy(x, y);
    for (const auto& c : constraints) {
      if (!c.cross_xy) continue;
      if (!c.grad_x) {
        throw Error(ErrorCode::kInvalidArgument, "x-dependent constraint needs grad_x");
      }
      const double fi = c.eval(x, y);
      cross += c.grad_y(x, y) * c.grad_x(x, y).transpose() / (fi * fi) - c.cross_xy(x, y) / fi;
    }
    return cross;
  };
  if (f0.grad_x) {
    out.grad_x = [f0, constraints, t](const Vec& x, const Vec& y) -> Vec {
      Vec g = t * f0.grad_x(x, y);
      for (const auto& c : constraints) {
        if (c.grad_x) g -= c.grad_x(x, y) / c.eval(x, y);
      }
      return g;
    };
  }
  return out;
}

ObjectiveOracle make_quadratic_form_oracle(const Mat& q, const Mat& b, const Vec& c) {
  require_symmetric(q, 1e-12, "Q");
  if (b.rows() != q.rows() || c.size() != q.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "quadratic form blocks");
  }
  ObjectiveOracle out;
  out.eval = [q, b, c](const Vec& x, const Vec& y) {
    return 0.5 * y.dot(q * y) + y.dot(b * x + c);
  };
  out.grad_y = [q, b, c](const Vec& x, const Vec& y) -> Vec { return q * y + b * x + c; };
  out.hess_yy = [q](const Vec&, const Vec&) -> Mat { return q; };
  out.cross_xy = [b](const Vec&, const Vec&) -> Mat { return b; };
  out.grad_x = [b](const Vec&, const Vec& y) -> Vec { return b.transpose() * y; };
  return out;
}

}  // namespace diffopt
