#include "diffopt/checks.hpp"

#include <cmath>
#include <random>

#include "diffopt/examples.hpp"

namespace diffopt::checks {

namespace {

SolveOptions tight_options() {
  SolveOptions opts;
  opts.grad_tol = 1e-13;
  return opts;
}

}  // namespace

Mat fd_solution_jacobian(const LowerProblem& lower, const Vec& x, const Vec& y_star, double h) {
  const SolveOptions opts = tight_options();
  return central_jacobian(
      [&](const Vec& xx) { return solve_lower(lower, xx, y_star, opts).point.y; }, x, h);
}

Vec fd_hypergradient(const BilevelProblem& prob, const Vec& x, const Vec& y_star, double h) {
  std::vector<Vec> starts;
  Eigen::Index offset = 0;
  for (const auto& l : prob.lower) {
    starts.push_back(y_star.segment(offset, l.y0.size()));
    offset += l.y0.size();
  }
  const SolveOptions opts = tight_options();
  const Mat row = central_jacobian(
      [&](const Vec& xx) {
        const LowerState s = solve_all_lower(prob, xx, starts, opts, false, false);
        return Vec(Vec::Constant(1, prob.upper_eval(xx, s.y)));
      },
      x, h);
  return row.transpose();
}

QuadraticEqualityFixture random_quadratic_equality(std::uint64_t seed, Eigen::Index n,
                                                   Eigen::Index m, Eigen::Index p) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    Mat out(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
      for (Eigen::Index i = 0; i < r; ++i) out(i, j) = normal(rng);
    }
    return out;
  };
  const Mat root = random(n, n);
  const Mat q = root.transpose() * root + static_cast<double>(n) * Mat::Identity(n, n);
  const Mat b = random(n, p);
  const Vec c = random(n, 1);
  QuadraticEqualityFixture fx{make_quadratic_form_oracle(q, b, c), {random(m, n), random(m, 1)},
                              random(p, 1)};
  return fx;
}

namespace {

class Suite {
 public:
  void add(std::string name, double error, double tolerance) {
    results_.push_back({std::move(name), error <= tolerance, error, tolerance});
  }
  void add_report(std::string name, const GradCheckReport& r, double rtol) {
    results_.push_back({std::move(name), r.pass, r.max_rel_err, rtol});
  }
  // Runs body; an exception counts as a failed check.
  template <typename Fn>
  void guarded(const std::string& name, Fn&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      results_.push_back({name + " (" + e.what() + ")", false, INFINITY, 0.0});
    }
  }
  std::vector<CheckResult> take() { return std::move(results_); }

 private:
  std::vector<CheckResult> results_;
};

Mat kkt_jacobian(const ObjectiveOracle& oracle, const EqualityConstraint& eq, const Vec& x,
                 const StationaryPoint& sp, FaultInjection fault) {
  if (fault != FaultInjection::kKktSign) return grad_equality_kkt(oracle, eq, x, sp).dy_dx;
  const SmoothFunction f = minimization_form(oracle);
  const SymFactor h(f.hess_yy(x, sp.y));
  const Mat hinv_cross = h.solve(f.cross_xy(x, sp.y));
  const Mat hinv_at = h.solve(Mat(eq.a.transpose()));
  const Mat schur = eq.a * hinv_at;
  return -hinv_at * sym_solve(schur, Mat(eq.a * hinv_cross)) - hinv_cross;
}

void check_scalar_mean(Suite& suite, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Vec slopes(3 + trial % 5);
    Vec offsets(slopes.size());
    for (Eigen::Index i = 0; i < slopes.size(); ++i) {
      slopes(i) = normal(rng);
      offsets(i) = normal(rng);
    }
    const Vec x = Vec::Constant(1, normal(rng));
    const ObjectiveOracle f = examples::scalar_mean_oracle(slopes, offsets);
    const StationaryPoint sp = newton_stationary(f, x, Vec::Zero(1));
    const double dg = grad_unconstrained(f, x, sp).dy_dx(0, 0);
    worst = std::max(worst, std::abs(dg - slopes.mean()));
  }
  suite.add("scalar_mean: implicit vs mean of h'", worst, 1e-12);
}

void check_three_minima(Suite& suite) {
  const ObjectiveOracle f = examples::three_minima_oracle();
  double formula_vs_kernel = 0.0;
  double kernel_vs_fd = 0.0;
  for (int s = 0; s <= 25; ++s) {
    const double xv = 0.5 + 2.5 * s / 25.0;
    const Vec x = Vec::Constant(1, xv);
    const auto roots = examples::three_minima_roots(xv);
    for (double root : roots) {
      const StationaryPoint sp = newton_stationary(f, x, Vec::Constant(1, root));
      const double kernel = grad_unconstrained(f, x, sp).dy_dx(0, 0);
      const double formula = examples::three_minima_grad(xv, sp.y(0));
      const LowerProblem lower{UnconstrainedLower{f}, sp.y};
      const double fd = fd_solution_jacobian(lower, x, sp.y)(0, 0);
      formula_vs_kernel = std::max(formula_vs_kernel, std::abs(formula - kernel));
      kernel_vs_fd = std::max(kernel_vs_fd, std::abs(kernel - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  suite.add("three_minima: branch formula vs implicit kernel", formula_vs_kernel, 1e-10);
  suite.add("three_minima: implicit kernel vs finite differences", kernel_vs_fd, 1e-5);
}

void check_softmax(Suite& suite, std::uint64_t seed) {
  using examples::SoftmaxVariantKind;
  for (auto kind : {SoftmaxVariantKind::kUnconstrained, SoftmaxVariantKind::kSumOne,
                    SoftmaxVariantKind::kUnitBall}) {
    const std::string tag = "softmax " + std::string(examples::to_string(kind)) + ": ";
    suite.guarded(tag + "setup", [&] {
      examples::SoftmaxParams params = examples::random_softmax(10, 2, seed);
      const auto cls = examples::bounded_class(params, kind);
      if (!cls) throw Error(ErrorCode::kInvalidArgument, "no bounded class for this seed");
      params.class_index = *cls;
      const examples::SoftmaxVariant variant{kind, 1.0};
      const LowerProblem lower = examples::softmax_lower(params, variant);
      const Vec theta = examples::pack(params);
      const LowerSolution sol = solve_lower(lower, theta, lower.y0);
      const Mat generic = differentiate_lower(lower, theta, sol).dy_dx;
      const double rtol = kind == SoftmaxVariantKind::kUnitBall ? 1e-4 : 1e-5;
      suite.add_report(tag + "implicit kernel vs finite differences",
                       gradcheck(generic, fd_solution_jacobian(lower, theta, sol.point.y), rtol),
                       rtol);
      const examples::SoftmaxDerivs closed =
          examples::softmax_param_grads(params, variant, sol.point.y);
      suite.add(tag + "closed form vs implicit kernel", max_abs(closed.jacobian - generic), 1e-8);
      if (kind == SoftmaxVariantKind::kSumOne) {
        const auto& eq = std::get<EqualityLower>(lower.kind);
        const Mat nullspace = grad_equality_nullspace(eq.objective, eq.constraint, theta,
                                                      sol.point).dy_dx;
        suite.add(tag + "H-dagger 1 = 0", max_abs(*closed.h_dagger * Vec::Ones(2)), 1e-10);
        suite.add(tag + "nullspace vs kkt", max_abs(nullspace - generic), 1e-8);
      }
    });
  }
}

void check_equality(Suite& suite, std::uint64_t seed, FaultInjection fault) {
  double agree = 0.0;
  double membership = 0.0;
  double fd_err = 0.0;
  for (std::uint64_t k = 0; k < 5; ++k) {
    const QuadraticEqualityFixture fx = random_quadratic_equality(seed * 1000 + k);
    const Vec y0 = particular_solution(fx.eq.a, fx.eq.b);
    const StationaryPoint sp = newton_equality(fx.oracle, fx.eq, fx.x, y0);
    const Mat nullspace = grad_equality_nullspace(fx.oracle, fx.eq, fx.x, sp).dy_dx;
    const Mat kkt = kkt_jacobian(fx.oracle, fx.eq, fx.x, sp, fault);
    agree = std::max(agree, max_abs(nullspace - kkt));
    membership = std::max({membership, max_abs(fx.eq.a * kkt), max_abs(fx.eq.a * nullspace)});
    const LowerProblem lower{EqualityLower{fx.oracle, fx.eq}, y0};
    fd_err = std::max(fd_err, gradcheck(kkt, fd_solution_jacobian(lower, fx.x, sp.y)).max_rel_err);
  }
  suite.add("equality quadratic: nullspace vs kkt", agree, 1e-8);
  suite.add("equality quadratic: ||A dy/dx|| (both methods)", membership, 1e-8);
  suite.add("equality quadratic: kkt vs finite differences", fd_err, 1e-5);
}

void check_positivity(Suite& suite) {
  const Vec derivs = Vec::Ones(1);
  double worst = 0.0;
  for (double xv : {-2.0, -1.0, -0.25, 0.3, 1.0, 2.5}) {
    for (double t : {1.0, 10.0, 100.0, 1000.0}) {
      const LowerProblem lower = examples::positivity_lower(derivs, xv, t);
      const Vec x = Vec::Constant(1, xv);
      const LowerSolution sol = solve_lower(lower, x, lower.y0);
      const double dg = differentiate_lower(lower, x, sol).dy_dx(0, 0);
      const auto ref = examples::positivity_reference(xv, t, derivs);
      worst = std::max({worst, std::abs(dg - ref.dg), std::abs(sol.point.y(0) - ref.g)});
    }
  }
  suite.add("positivity: barrier pipeline vs closed form", worst, 1e-8);
}

void check_monotone(Suite& suite) {
  double worst = 0.0;
  auto compare = [&](const ObjectiveOracle& f, const Vec& x, const StationaryPoint& sp) {
    const double base = grad_unconstrained(f, x, sp).dy_dx(0, 0);
    const double shift = std::abs(f.eval(x, sp.y)) + 1.0;
    for (const ObjectiveOracle& g : {compose_exp(f), compose_log(f, shift)}) {
      worst = std::max(worst, std::abs(grad_unconstrained(g, x, sp).dy_dx(0, 0) - base));
    }
  };
  const ObjectiveOracle mean = examples::scalar_mean_oracle(Vec::LinSpaced(3, 0.5, 1.5),
                                                            Vec::LinSpaced(3, -1.0, 1.0));
  const Vec x = Vec::Constant(1, 0.3);
  compare(mean, x, newton_stationary(mean, x, Vec::Zero(1)));
  const ObjectiveOracle three = examples::three_minima_oracle();
  const Vec x1 = Vec::Constant(1, 1.0);
  for (double root : examples::three_minima_roots(1.0)) {
    compare(three, x1, newton_stationary(three, x1, Vec::Constant(1, root)));
  }
  suite.add("monotone transforms: exp and log agree with f", worst, 1e-8);
}

void check_bilevel(Suite& suite, std::uint64_t seed) {
  const examples::BilevelSoftmaxFixture fx = examples::bilevel_softmax_fixture(3, 2, seed);
  std::vector<Vec> starts;
  for (const auto& l : fx.problem.lower) starts.push_back(l.y0);
  const LowerState state = solve_all_lower(fx.problem, fx.theta0, starts, {}, false, true);
  const Vec analytic = chain_rule_grad(fx.problem, fx.theta0, state.y, state.dy_dx);
  const Vec numeric = fd_hypergradient(fx.problem, fx.theta0, state.y);
  suite.add_report("bilevel: hypergradient vs finite differences",
                   gradcheck(analytic, numeric, 1e-4), 1e-4);
}

void check_audits(Suite& suite, std::uint64_t seed) {
  examples::SoftmaxParams params = examples::random_softmax(4, 2, seed);
  const Vec y = Vec::LinSpaced(2, -0.3, 0.4);
  bool ok = audit_oracle(examples::three_minima_oracle(), Vec::Constant(1, 1.3),
                         Vec::Constant(1, 0.7))
                .pass();
  ok = ok && audit_oracle(examples::softmax_oracle(params), examples::pack(params), y).pass();
  ok = ok && audit_oracle(examples::scalar_mean_oracle(Vec::Ones(2), Vec::Zero(2)),
                          Vec::Constant(1, 0.4), Vec::Constant(1, -0.2))
                 .pass();
  suite.add("oracle derivative audits", ok ? 0.0 : 1.0, 0.0);
}

}  // namespace

std::vector<CheckResult> run_gradcheck_suite(std::uint64_t seed, FaultInjection fault) {
  Suite suite;
  suite.guarded("scalar_mean", [&] { check_scalar_mean(suite, seed); });
  suite.guarded("three_minima", [&] { check_three_minima(suite); });
  check_softmax(suite, seed);
  suite.guarded("equality quadratic", [&] { check_equality(suite, seed, fault); });
  suite.guarded("positivity", [&] { check_positivity(suite); });
  suite.guarded("monotone transforms", [&] { check_monotone(suite); });
  suite.guarded("bilevel", [&] { check_bilevel(suite, seed); });
  suite.guarded("oracle audits", [&] { check_audits(suite, seed); });
  return suite.take();
}

}  // namespace diffopt::checks
