#include "diffopt/examples.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace diffopt::examples {

ScalarValue scalar_mean(const Vec& h_values, const Vec& h_derivs) {
  if (h_values.size() == 0 || h_values.size() != h_derivs.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "scalar_mean needs m >= 1 matching entries");
  }
  return {h_values.mean(), h_derivs.mean()};
}

ObjectiveOracle scalar_mean_oracle(const Vec& slopes, const Vec& offsets) {
  return make_quadratic_oracle(Vec::Ones(slopes.size()), affine_scalar_targets(slopes, offsets));
}

// ---- three stationary points --------------------------------------------

ObjectiveOracle three_minima_oracle() {
  ObjectiveOracle f;
  f.eval = [](const Vec& xv, const Vec& yv) {
    const double x = xv(0), y = yv(0);
    return x * std::pow(y, 4) + 2.0 * x * x * std::pow(y, 3) - 12.0 * y * y;
  };
  f.grad_y = [](const Vec& xv, const Vec& yv) -> Vec {
    const double x = xv(0), y = yv(0);
    return Vec::Constant(1, 4.0 * x * y * y * y + 6.0 * x * x * y * y - 24.0 * y);
  };
  f.hess_yy = [](const Vec& xv, const Vec& yv) -> Mat {
    const double x = xv(0), y = yv(0);
    return Mat::Constant(1, 1, 12.0 * x * y * y + 12.0 * x * x * y - 24.0);
  };
  f.cross_xy = [](const Vec& xv, const Vec& yv) -> Mat {
    const double x = xv(0), y = yv(0);
    return Mat::Constant(1, 1, 4.0 * y * y * y + 12.0 * x * y * y);
  };
  f.grad_x = [](const Vec& xv, const Vec& yv) -> Vec {
    const double x = xv(0), y = yv(0);
    return Vec::Constant(1, std::pow(y, 4) + 4.0 * x * std::pow(y, 3));
  };
  return f;
}

std::vector<double> three_minima_roots(double x) {
  if (x == 0.0) throw Error(ErrorCode::kInvalidArgument, "three_minima_roots needs x != 0");
  std::vector<double> roots{0.0};
  const double disc = 9.0 * std::pow(x, 4) + 96.0 * x;
  // Relative cutoff so the merge point computed in floating point reports two roots.
  const double scale = 9.0 * std::pow(x, 4) + 96.0 * std::abs(x);
  if (std::abs(disc) <= 1e-12 * scale) {
    roots.push_back(-3.0 * x * x / (4.0 * x));
  } else if (disc > 0.0) {
    const double s = std::sqrt(disc);
    roots.push_back((-3.0 * x * x + s) / (4.0 * x));
    roots.push_back((-3.0 * x * x - s) / (4.0 * x));
  }
  return roots;
}

double three_minima_grad(double x, double y) {
  const double denom = 3.0 * x * y * y + 3.0 * x * x * y - 6.0;
  if (std::abs(denom) <= 1e-12) {
    throw Error(ErrorCode::kDegenerateBranch, "zero denominator in branch derivative");
  }
  return -(y * y * y + 3.0 * x * y * y) / denom;
}

double three_minima_double_root_x() { return -2.0 * std::cbrt(4.0 / 3.0); }

// ---- soft-max -------------------------------------------------------------

void SoftmaxParams::validate() const {
  if (a.rows() < 2) throw Error(ErrorCode::kInvalidArgument, "soft-max needs m >= 2");
  if (b.size() != a.rows()) throw Error(ErrorCode::kDimensionMismatch, "b length vs classes");
  if (class_index < 0 || class_index >= a.rows()) {
    throw Error(ErrorCode::kInvalidArgument, "class index out of range");
  }
  require_finite(a, "a");
  require_finite(b, "b");
}

Vec pack(const SoftmaxParams& params) {
  Vec theta(params.param_count());
  for (Eigen::Index j = 0; j < params.classes(); ++j) {
    for (Eigen::Index k = 0; k < params.dims(); ++k) theta(params.a_index(j, k)) = params.a(j, k);
    theta(params.b_index(j)) = params.b(j);
  }
  return theta;
}

SoftmaxParams unpack(const Vec& theta, Eigen::Index m, Eigen::Index n, int class_index) {
  if (theta.size() != m * n + m) throw Error(ErrorCode::kDimensionMismatch, "theta length");
  SoftmaxParams p{Mat(m, n), Vec(m), class_index};
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) p.a(j, k) = theta(p.a_index(j, k));
    p.b(j) = theta(p.b_index(j));
  }
  return p;
}

Vec softmax_likelihoods(const Mat& a, const Vec& b, const Vec& y) {
  Vec z = a * y + b;
  z.array() -= z.maxCoeff();
  Vec l = z.array().exp();
  return l / l.sum();
}

namespace {

struct SoftmaxPoint {
  SoftmaxParams params;
  Vec l;
  Vec a_bar;
};

SoftmaxPoint at(const SoftmaxParams& shape, const Vec& theta, const Vec& y) {
  SoftmaxPoint pt{unpack(theta, shape.classes(), shape.dims(), shape.class_index), Vec(), Vec()};
  pt.l = softmax_likelihoods(pt.params.a, pt.params.b, y);
  pt.a_bar = pt.params.a.transpose() * pt.l;
  return pt;
}

// Hessian of log l_i: a_bar a_bar^T - sum_j l_j a_j a_j^T.
Mat log_likelihood_hessian(const Mat& a, const Vec& l, const Vec& a_bar) {
  return a_bar * a_bar.transpose() - a.transpose() * l.asDiagonal() * a;
}

}  // namespace

ObjectiveOracle softmax_oracle(const SoftmaxParams& params) {
  params.validate();
  const SoftmaxParams shape = params;
  ObjectiveOracle f;
  f.sense = Sense::kMaximize;
  f.eval = [shape](const Vec& theta, const Vec& y) {
    const SoftmaxParams p = unpack(theta, shape.classes(), shape.dims(), shape.class_index);
    const Vec z = p.a * y + p.b;
    const double zmax = z.maxCoeff();
    const double log_z = zmax + std::log((z.array() - zmax).exp().sum());
    return z(shape.class_index) - log_z;
  };
  f.grad_y = [shape](const Vec& theta, const Vec& y) -> Vec {
    const SoftmaxPoint pt = at(shape, theta, y);
    return pt.params.a.row(shape.class_index).transpose() - pt.a_bar;
  };
  f.hess_yy = [shape](const Vec& theta, const Vec& y) -> Mat {
    const SoftmaxPoint pt = at(shape, theta, y);
    return log_likelihood_hessian(pt.params.a, pt.l, pt.a_bar);
  };
  f.cross_xy = [shape](const Vec& theta, const Vec& y) -> Mat {
    const SoftmaxPoint pt = at(shape, theta, y);
    const Eigen::Index n = shape.dims();
    Mat cross = Mat::Zero(n, shape.param_count());
    for (Eigen::Index j = 0; j < shape.classes(); ++j) {
      const Vec centred = pt.params.a.row(j).transpose() - pt.a_bar;
      for (Eigen::Index k = 0; k < n; ++k) {
        auto col = cross.col(shape.a_index(j, k));
        col = -pt.l(j) * y(k) * centred;
        col(k) += (j == shape.class_index ? 1.0 : 0.0) - pt.l(j);
      }
      cross.col(shape.b_index(j)) = -pt.l(j) * centred;
    }
    return cross;
  };
  f.grad_x = [shape](const Vec& theta, const Vec& y) -> Vec {
    const SoftmaxPoint pt = at(shape, theta, y);
    Vec g(shape.param_count());
    for (Eigen::Index j = 0; j < shape.classes(); ++j) {
      const double w = (j == shape.class_index ? 1.0 : 0.0) - pt.l(j);
      for (Eigen::Index k = 0; k < shape.dims(); ++k) g(shape.a_index(j, k)) = w * y(k);
      g(shape.b_index(j)) = w;
    }
    return g;
  };
  return f;
}

InequalityConstraint unit_ball_constraint() {
  InequalityConstraint c;
  c.eval = [](const Vec&, const Vec& y) { return y.squaredNorm() - 1.0; };
  c.grad_y = [](const Vec&, const Vec& y) -> Vec { return 2.0 * y; };
  c.hess_yy = [](const Vec&, const Vec& y) -> Mat {
    return 2.0 * Mat::Identity(y.size(), y.size());
  };
  return c;
}

EqualityConstraint sum_one_constraint(Eigen::Index n) {
  return {Mat::Ones(1, n), Vec::Ones(1)};
}

std::string_view to_string(SoftmaxVariantKind kind) {
  switch (kind) {
    case SoftmaxVariantKind::kUnconstrained: return "unconstrained";
    case SoftmaxVariantKind::kSumOne: return "sum-one";
    case SoftmaxVariantKind::kUnitBall: return "ball";
  }
  return "unknown";
}

std::optional<SoftmaxVariantKind> parse_variant(std::string_view name) {
  if (name == "unconstrained") return SoftmaxVariantKind::kUnconstrained;
  if (name == "sum-one") return SoftmaxVariantKind::kSumOne;
  if (name == "ball") return SoftmaxVariantKind::kUnitBall;
  return std::nullopt;
}

LowerProblem softmax_lower(const SoftmaxParams& params, SoftmaxVariant variant) {
  const Eigen::Index n = params.dims();
  switch (variant.kind) {
    case SoftmaxVariantKind::kUnconstrained:
      return {UnconstrainedLower{softmax_oracle(params)}, Vec::Zero(n)};
    case SoftmaxVariantKind::kSumOne:
      return {EqualityLower{softmax_oracle(params), sum_one_constraint(n)},
              Vec::Constant(n, 1.0 / static_cast<double>(n))};
    case SoftmaxVariantKind::kUnitBall: {
      BarrierOptions bopts;
      bopts.t_fixed = variant.t;
      return {BarrierLower{softmax_oracle(params), {unit_ball_constraint()}, bopts}, Vec::Zero(n)};
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown soft-max variant");
}

Mat unit_ball_barrier_hessian(const Vec& y) {
  const double s = 1.0 - y.squaredNorm();
  if (!(s > 1e-12)) throw Error(ErrorCode::kBoundaryContact, "point on the unit sphere");
  const Eigen::Index n = y.size();
  return -4.0 / (s * s) * y * y.transpose() - 2.0 / s * Mat::Identity(n, n);
}

SoftmaxDerivs softmax_param_grads(const SoftmaxParams& params, SoftmaxVariant variant,
                                  const Vec& y_star) {
  params.validate();
  const Eigen::Index m = params.classes();
  const Eigen::Index n = params.dims();
  const int i = params.class_index;
  if (y_star.size() != n) throw Error(ErrorCode::kDimensionMismatch, "y_star length");

  SoftmaxDerivs out;
  out.likelihoods = softmax_likelihoods(params.a, params.b, y_star);
  out.a_bar = params.a.transpose() * out.likelihoods;
  out.h = log_likelihood_hessian(params.a, out.likelihoods, out.a_bar);
  const Vec& l = out.likelihoods;
  const Vec& a_bar = out.a_bar;
  const Vec grad = params.a.row(i).transpose() - a_bar;

  auto factor = [](const Mat& k) {
    try {
      return SymFactor(k);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kSingularMatrix) throw Error(ErrorCode::kSingularHessian, e.what());
      throw;
    }
  };
  auto check_residual = [](double r) {
    if (!(r <= 1e-8)) {
      throw Error(ErrorCode::kResidualTooLarge, "y_star is not stationary: " + std::to_string(r));
    }
  };

  out.jacobian = Mat::Zero(n, params.param_count());
  auto e = [n](Eigen::Index k) { return Vec(Vec::Unit(n, k)); };

  if (variant.kind == SoftmaxVariantKind::kUnitBall) {
    const double t = variant.t;
    const double s = 1.0 - y_star.squaredNorm();
    if (!(s > 1e-12)) throw Error(ErrorCode::kBoundaryContact, "y_star on the unit sphere");
    check_residual(max_abs(t * grad - 2.0 / s * y_star) / std::max(1.0, t));
    const SymFactor kf = factor(t * out.h + unit_ball_barrier_hessian(y_star));
    for (Eigen::Index j = 0; j < m; ++j) {
      const Vec centred = params.a.row(j).transpose() - a_bar;
      for (Eigen::Index k = 0; k < n; ++k) {
        const Vec rhs = j == i ? Vec((l(i) - 1.0) * e(k) + l(i) * y_star(k) * centred)
                               : Vec(l(j) * (y_star(k) * centred + e(k)));
        out.jacobian.col(params.a_index(j, k)) = t * kf.solve(rhs);
      }
      out.jacobian.col(params.b_index(j)) = t * l(j) * kf.solve(centred);
    }
    return out;
  }

  const SymFactor hf = factor(out.h);
  Mat inverse = hf.solve(Mat(Mat::Identity(n, n)));
  if (variant.kind == SoftmaxVariantKind::kSumOne) {
    if (std::abs(y_star.sum() - 1.0) > 1e-8) {
      throw Error(ErrorCode::kInfeasible, "y_star violates 1^T y = 1");
    }
    check_residual(max_abs(grad.array() - grad.mean()));
    const Vec hinv_one = inverse * Vec::Ones(n);
    out.h_dagger = inverse - hinv_one * hinv_one.transpose() / hinv_one.sum();
    inverse = *out.h_dagger;
  } else {
    check_residual(max_abs(grad));
  }

  for (Eigen::Index j = 0; j < m; ++j) {
    const Vec centred = params.a.row(j).transpose() - a_bar;
    for (Eigen::Index k = 0; k < n; ++k) {
      out.jacobian.col(params.a_index(j, k)) =
          j == i ? Vec((l(i) - 1.0) * inverse.col(k))
                 : Vec(l(j) * inverse * (y_star(k) * centred + e(k)));
    }
    // The class-i column stays exactly zero.
    if (j != i) out.jacobian.col(params.b_index(j)) = l(j) * inverse * centred;
  }
  return out;
}

SoftmaxParams random_softmax(Eigen::Index m, Eigen::Index n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SoftmaxParams p{Mat(m, n), Vec(m), 0};
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = 0; k < n; ++k) p.a(j, k) = scale * normal(rng);
  }
  for (Eigen::Index j = 0; j < m; ++j) p.b(j) = scale * normal(rng);
  return p;
}

namespace {

// Is the origin strictly inside the convex hull of the given points (rows)?
// Supports dimension 1 and 2.
bool origin_interior(const Mat& pts) {
  constexpr double kMargin = 1e-9;
  if (pts.cols() == 1) {
    return pts.col(0).maxCoeff() > kMargin && pts.col(0).minCoeff() < -kMargin;
  }
  if (pts.cols() != 2) {
    throw Error(ErrorCode::kInvalidArgument, "interior test supports dimension <= 2");
  }
  std::vector<double> angles;
  for (Eigen::Index r = 0; r < pts.rows(); ++r) {
    if (pts.row(r).norm() > kMargin) angles.push_back(std::atan2(pts(r, 1), pts(r, 0)));
  }
  if (angles.size() < 3) return false;
  std::sort(angles.begin(), angles.end());
  double gap = angles.front() + 2.0 * std::numbers::pi - angles.back();
  for (std::size_t k = 1; k < angles.size(); ++k) gap = std::max(gap, angles[k] - angles[k - 1]);
  return gap < std::numbers::pi - 1e-6;
}

}  // namespace

bool class_bounded(const SoftmaxParams& params, int class_index, SoftmaxVariantKind kind) {
  if (kind == SoftmaxVariantKind::kUnitBall) return true;
  Mat basis = Mat::Identity(params.dims(), params.dims());
  if (kind == SoftmaxVariantKind::kSumOne) basis = nullspace_basis(Mat::Ones(1, params.dims()));
  const Mat rel = (params.a.rowwise() - params.a.row(class_index)) * basis;
  return origin_interior(rel);
}

std::optional<int> bounded_class(const SoftmaxParams& params, SoftmaxVariantKind kind) {
  for (Eigen::Index i = 0; i < params.classes(); ++i) {
    if (class_bounded(params, static_cast<int>(i), kind)) return static_cast<int>(i);
  }
  return std::nullopt;
}

// ---- positivity -----------------------------------------------------------

ScalarValue positivity_reference(const Vec& h_values, const Vec& h_derivs, double t) {
  if (!(t > 0.0)) throw Error(ErrorCode::kInvalidArgument, "t must be positive");
  if (h_values.size() == 0 || h_values.size() != h_derivs.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "positivity_reference inputs");
  }
  const double m = static_cast<double>(h_values.size());
  const double sum = h_values.sum();
  // Positive root of 2tm y^2 - 2t S y - 1 = 0, written to avoid cancellation.
  const double qa = 2.0 * t * m;
  const double qb = -2.0 * t * sum;
  const double root_disc = std::sqrt(qb * qb + 4.0 * qa);
  const double g = qb <= 0.0 ? (-qb + root_disc) / (2.0 * qa) : 2.0 / (qb + root_disc);
  const double dg = 2.0 * t * h_derivs.sum() / (2.0 * t * m + 1.0 / (g * g));
  return {g, dg};
}

ScalarValue positivity_reference(double x, double t, const Vec& h_derivs) {
  return positivity_reference(Vec(h_derivs * x), h_derivs, t);
}

ScalarValue positivity_truth(double x, const Vec& h_derivs) {
  const double mean = h_derivs.mean() * x;
  if (mean > 0.0) return {mean, h_derivs.mean()};
  if (mean < 0.0) return {0.0, 0.0};
  return {0.0, x == 0.0 ? h_derivs.mean() : 0.0};
}

LowerProblem positivity_lower(const Vec& h_derivs, double x_start, std::optional<double> t_fixed) {
  InequalityConstraint nonneg;
  nonneg.eval = [](const Vec&, const Vec& y) { return -y(0); };
  nonneg.grad_y = [](const Vec&, const Vec&) -> Vec { return Vec::Constant(1, -1.0); };
  nonneg.hess_yy = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
  BarrierOptions bopts;
  bopts.t_fixed = t_fixed;
  return {BarrierLower{scalar_mean_oracle(h_derivs, Vec::Zero(h_derivs.size())), {nonneg}, bopts},
          Vec::Constant(1, positivity_start(x_start))};
}

double positivity_start(double x) { return std::max(x, 0.0) + 0.5; }

// ---- bi-level -------------------------------------------------------------

BilevelSoftmaxFixture bilevel_softmax_fixture(Eigen::Index m, Eigen::Index n, std::uint64_t seed,
                                              double t_barrier) {
  if (m < 2) throw Error(ErrorCode::kInvalidArgument, "bilevel fixture needs m >= 2");
  if (n < 2) throw Error(ErrorCode::kInvalidArgument, "bilevel fixture needs n >= 2");
  if (!(t_barrier > 0.0)) throw Error(ErrorCode::kInvalidArgument, "t_barrier must be positive");
  BilevelSoftmaxFixture fx;
  fx.classes = m;
  fx.dims = n;
  SoftmaxParams params = random_softmax(m, n, seed, 0.5);
  fx.theta0 = pack(params);
  fx.targets = Mat::Zero(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(m) +
        std::numbers::pi / 2.0;
    fx.targets(i, 0) = std::cos(angle);
    fx.targets(i, 1) = std::sin(angle);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    params.class_index = static_cast<int>(i);
    LowerProblem lower = softmax_lower(params, {SoftmaxVariantKind::kUnitBall, t_barrier});
    BarrierOptions& bopts = std::get<BarrierLower>(lower.kind).barrier;
    if (t_barrier > bopts.t_init) {
      // One constraint: the duality gap after centering at t is 1 / t.
      bopts.t_fixed.reset();
      bopts.duality_gap_tol = 1.0 / t_barrier;
    }
    fx.problem.lower.push_back(std::move(lower));
  }
  Vec stacked_targets(m * n);
  for (Eigen::Index i = 0; i < m; ++i) stacked_targets.segment(i * n, n) = fx.targets.row(i);
  fx.problem.upper_eval = [stacked_targets](const Vec&, const Vec& y) {
    return 0.5 * (y - stacked_targets).squaredNorm();
  };
  fx.problem.upper_grad_x = [](const Vec& x, const Vec&) -> Vec { return Vec::Zero(x.size()); };
  fx.problem.upper_grad_y = [stacked_targets](const Vec&, const Vec& y) -> Vec {
    return y - stacked_targets;
  };
  return fx;
}

}  // namespace diffopt::examples
