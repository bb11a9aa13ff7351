#include "cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "diffopt/checks.hpp"
#include "diffopt/examples.hpp"

namespace diffopt::cli {

namespace {

using nlohmann::json;

// 17 significant digits, '.' decimal point regardless of locale.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

json to_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(Vec(m.row(r).transpose())));
  return rows;
}

json to_json(const GradCheckReport& r, double rtol) {
  return {{"max_abs_err", r.max_abs_err},
          {"max_rel_err", r.max_rel_err},
          {"worst_index", {r.worst_index.first, r.worst_index.second}},
          {"rtol", rtol},
          {"pass", r.pass}};
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Command {
 public:
  virtual ~Command() = default;
  virtual int execute(std::ostream& out) = 0;
};

// ---- three-minima -----------------------------------------------------------

struct ThreeMinima : Command {
  double x_min = 0.5;
  double x_max = 3.0;
  int steps = 50;

  int execute(std::ostream& out) override {
    if (!(x_min < x_max) || steps < 2) throw UsageError("need x-min < x-max and steps >= 2");
    const ObjectiveOracle f = examples::three_minima_oracle();
    constexpr double h = kFdStep;
    out << "x,branch,g,g_prime,g_prime_fd\n";
    for (int s = 0; s < steps; ++s) {
      const double xv = x_min + (x_max - x_min) * s / (steps - 1);
      if (xv == 0.0) continue;
      const auto roots = examples::three_minima_roots(xv);
      const auto plus = examples::three_minima_roots(xv + h);
      const auto minus = examples::three_minima_roots(xv - h);
      const Vec x = Vec::Constant(1, xv);
      for (std::size_t b = 0; b < roots.size(); ++b) {
        const StationaryPoint sp = newton_stationary(f, x, Vec::Constant(1, roots[b]));
        const double g_prime = grad_unconstrained(f, x, sp).dy_dx(0, 0);
        // Branch dropout near the merge point leaves the difference undefined.
        const double fd = b < plus.size() && b < minus.size() && plus.size() == minus.size()
                              ? (plus[b] - minus[b]) / (2.0 * h)
                              : std::nan("");
        out << num(xv) << ',' << b << ',' << num(roots[b]) << ',' << num(g_prime) << ','
            << num(fd) << '\n';
      }
    }
    return kOk;
  }
};

// ---- positivity -------------------------------------------------------------

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw UsageError("bad number '" + item + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw UsageError("empty list");
  return values;
}

struct Positivity : Command {
  double x_min = -2.0;
  double x_max = 2.0;
  int steps = 81;
  std::string t_list = "1,10,100,1000";

  int execute(std::ostream& out) override {
    if (!(x_min < x_max) || steps < 2) throw UsageError("need x-min < x-max and steps >= 2");
    const std::vector<double> ts = parse_list(t_list);
    for (double t : ts) {
      if (!(t > 0.0)) throw UsageError("t values must be positive");
    }
    const Vec derivs = Vec::Ones(1);
    out << "x,t,g_true,g_t,dg_true,dg_t\n";
    for (double t : ts) {
      for (int s = 0; s < steps; ++s) {
        const double xv = x_min + (x_max - x_min) * s / (steps - 1);
        const Vec x = Vec::Constant(1, xv);
        const LowerProblem lower = examples::positivity_lower(derivs, xv, t);
        const LowerSolution sol = solve_lower(lower, x, lower.y0);
        const double dg = differentiate_lower(lower, x, sol).dy_dx(0, 0);
        const auto truth = examples::positivity_truth(xv, derivs);
        out << num(xv) << ',' << num(t) << ',' << num(truth.g) << ',' << num(sol.point.y(0))
            << ',' << num(truth.dg) << ',' << num(dg) << '\n';
      }
    }
    return kOk;
  }
};

// ---- softmax ----------------------------------------------------------------

struct Softmax : Command {
  std::string variant = "unconstrained";
  int classes = 10;
  int dims = 2;
  std::uint64_t seed = 0;
  double eta = 0.1;
  double t = 1.0;
  std::optional<int> class_index;
  int grid = 41;
  double extent = 3.0;

  json params_json(const examples::SoftmaxParams& p) const {
    return {{"a", to_json(p.a)}, {"b", to_json(p.b)}};
  }

  json contour(const examples::SoftmaxParams& p) const {
    json rows = json::array();
    for (int r = 0; r < grid; ++r) {
      json row = json::array();
      for (int c = 0; c < grid; ++c) {
        Vec y(2);
        y << -extent + 2.0 * extent * c / (grid - 1), -extent + 2.0 * extent * r / (grid - 1);
        row.push_back(examples::softmax_likelihoods(p.a, p.b, y)(p.class_index));
      }
      rows.push_back(row);
    }
    return rows;
  }

  int execute(std::ostream& out) override {
    const auto kind = examples::parse_variant(variant);
    if (!kind) throw UsageError("variant must be unconstrained, sum-one or ball");
    if (classes < 2 || dims < 1 || grid < 2 || !(extent > 0.0) || !(t > 0.0)) {
      throw UsageError("invalid soft-max dimensions, grid or t");
    }
    examples::SoftmaxParams params = examples::random_softmax(classes, dims, seed);
    if (class_index) {
      if (*class_index < 0 || *class_index >= classes) throw UsageError("class out of range");
      // Newton would otherwise stop far out along a ray once the gradient underflows.
      if (dims <= 2 && !examples::class_bounded(params, *class_index, *kind)) {
        throw Error(ErrorCode::kLowerSolveFailed, "class " + std::to_string(*class_index) +
                                                      " has no finite maximizer");
      }
      params.class_index = *class_index;
    } else {
      const auto cls = dims <= 2 ? examples::bounded_class(params, *kind) : std::optional<int>(0);
      if (!cls) throw Error(ErrorCode::kLowerSolveFailed, "no class has a finite maximizer");
      params.class_index = *cls;
    }
    const examples::SoftmaxVariant v{*kind, t};
    const LowerProblem lower = examples::softmax_lower(params, v);
    const Vec theta = examples::pack(params);
    const LowerSolution before = solve_lower(lower, theta, lower.y0);
    const Mat generic = differentiate_lower(lower, theta, before).dy_dx;
    const examples::SoftmaxDerivs closed =
        examples::softmax_param_grads(params, v, before.point.y);
    const double rtol = *kind == examples::SoftmaxVariantKind::kUnitBall ? 1e-4 : 1e-5;
    const GradCheckReport report =
        gradcheck(generic, checks::fd_solution_jacobian(lower, theta, before.point.y), rtol);

    // theta <- theta - eta e_1^T d g_i / d theta
    const Vec theta_after = theta - eta * Vec(closed.jacobian.row(0).transpose());
    const examples::SoftmaxParams after_params =
        examples::unpack(theta_after, classes, dims, params.class_index);
    const LowerSolution after = solve_lower(lower, theta_after, before.point.y);

    json derivs_a = json::array();
    for (int j = 0; j < classes; ++j) {
      json row = json::array();
      for (int k = 0; k < dims; ++k) row.push_back(to_json(closed.d_a(params, j, k)));
      derivs_a.push_back(row);
    }
    json derivs_b = json::array();
    for (int j = 0; j < classes; ++j) derivs_b.push_back(to_json(closed.d_b(params, j)));

    json doc = {{"command", "softmax"},
                {"variant", variant},
                {"seed", seed},
                {"classes", classes},
                {"dims", dims},
                {"class_index", params.class_index},
                {"t", t},
                {"eta", eta},
                {"params_before", params_json(params)},
                {"params_after", params_json(after_params)},
                {"x_star_before", to_json(before.point.y)},
                {"x_star_after", to_json(after.point.y)},
                {"residual_before", before.point.residual},
                {"residual_after", after.point.residual},
                {"derivatives", {{"a", derivs_a}, {"b", derivs_b}}},
                {"a_bar", to_json(closed.a_bar)},
                {"hessian", to_json(closed.h)},
                {"closed_form_vs_kernel", max_abs(closed.jacobian - generic)},
                {"gradcheck", to_json(report, rtol)}};
    if (closed.h_dagger) doc["h_dagger"] = to_json(*closed.h_dagger);
    if (dims == 2) {
      json axis = json::array();
      for (int c = 0; c < grid; ++c) axis.push_back(-extent + 2.0 * extent * c / (grid - 1));
      doc["contour"] = {{"axis", axis},
                        {"likelihood_before", contour(params)},
                        {"likelihood_after", contour(after_params)}};
    }
    out << doc.dump(2) << '\n';
    return kOk;
  }
};

// ---- bilevel ----------------------------------------------------------------

struct Bilevel : Command {
  std::uint64_t seed = 0;
  int classes = 3;
  double eta = 1.0;
  int max_iters = 500;
  double tol = 1e-6;
  double barrier_t = examples::kBilevelBarrierT;
  int max_halvings = 20;
  bool parallel = false;
  std::string summary_path;
  std::ostream* err = nullptr;

  int execute(std::ostream& out) override {
    if (classes < 2 || max_iters < 0 || !(eta >= 0.0) || !(barrier_t > 0.0) || max_halvings < 0) {
      throw UsageError("invalid bilevel settings");
    }
    const examples::BilevelSoftmaxFixture fx =
        examples::bilevel_softmax_fixture(classes, 2, seed, barrier_t);
    DescendOptions opts;
    opts.eta = eta;
    opts.max_iters = max_iters;
    opts.obj_tol = tol;
    opts.max_halvings = max_halvings;
    opts.parallel = parallel;
    const BilevelTrace trace = descend(fx.problem, fx.theta0, opts);

    out << "iter,objective,grad_norm\n";
    for (const auto& r : trace.iterations) {
      out << r.iter << ',' << num(r.objective) << ',' << num(r.grad_norm) << '\n';
    }

    const TraceRecord& last = trace.iterations.back();
    const examples::SoftmaxParams final_params = examples::unpack(last.x, classes, 2, 0);
    Mat solutions(classes, 2);
    for (int i = 0; i < classes; ++i) solutions.row(i) = last.y.segment(2 * i, 2).transpose();
    const json summary = {{"command", "bilevel"},
                          {"seed", seed},
                          {"classes", classes},
                          {"eta", eta},
                          {"barrier_t", barrier_t},
                          {"iterations", last.iter},
                          {"stop_reason", std::string(to_string(trace.reason))},
                          {"initial_objective", trace.iterations.front().objective},
                          {"final_objective", last.objective},
                          {"theta", {{"a", to_json(final_params.a)}, {"b", to_json(final_params.b)}}},
                          {"solutions", to_json(solutions)},
                          {"targets", to_json(fx.targets)}};
    if (summary_path.empty()) {
      *err << summary.dump() << '\n';
    } else {
      std::ofstream file(summary_path);
      if (!file) throw UsageError("cannot write " + summary_path);
      file << summary.dump(2) << '\n';
    }
    return kOk;
  }
};

// ---- gradcheck --------------------------------------------------------------

struct GradcheckCmd : Command {
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string fault = "none";

  int execute(std::ostream& out) override {
    checks::FaultInjection injection = checks::FaultInjection::kNone;
    if (fault == "kkt-sign") {
      injection = checks::FaultInjection::kKktSign;
    } else if (fault != "none") {
      throw UsageError("unknown fault '" + fault + "'");
    }
    if (format != "json" && format != "csv") throw UsageError("format must be json or csv");
    const auto results = checks::run_gradcheck_suite(seed, injection);
    bool all = true;
    for (const auto& r : results) all = all && r.pass;
    if (format == "csv") {
      out << "check,pass,error,tolerance\n";
      for (const auto& r : results) {
        out << '"' << r.name << "\"," << (r.pass ? "pass" : "FAIL") << ',' << num(r.error) << ','
            << num(r.tolerance) << '\n';
      }
    } else {
      json rows = json::array();
      for (const auto& r : results) {
        rows.push_back({{"check", r.name},
                        {"pass", r.pass},
                        {"error", std::isfinite(r.error) ? json(r.error) : json(nullptr)},
                        {"tolerance", r.tolerance}});
      }
      out << json{{"command", "gradcheck"}, {"seed", seed}, {"all_pass", all}, {"checks", rows}}
                 .dump(2)
          << '\n';
    }
    return all ? kOk : kCheckFailed;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Derivatives of argmin/argmax problems and bi-level descent", "diffopt"};
  app.require_subcommand(1);
  std::string output;
  app.add_option("-o,--output", output, "Write results to this file instead of stdout");

  ThreeMinima three;
  auto* three_cmd = app.add_subcommand("three-minima", "Branches of x y^4 + 2x^2 y^3 - 12 y^2");
  three_cmd->add_option("--x-min", three.x_min);
  three_cmd->add_option("--x-max", three.x_max);
  three_cmd->add_option("--steps", three.steps, "Number of grid points");

  Positivity pos;
  auto* pos_cmd = app.add_subcommand("positivity", "argmin_{y >= 0} (x - y)^2 and its barrier approximations");
  pos_cmd->add_option("--x-min", pos.x_min);
  pos_cmd->add_option("--x-max", pos.x_max);
  pos_cmd->add_option("--steps", pos.steps, "Number of grid points");
  pos_cmd->add_option("--t", pos.t_list, "Comma-separated barrier parameters");

  Softmax soft;
  auto* soft_cmd = app.add_subcommand("softmax", "Maximum-likelihood feature of a soft-max class");
  soft_cmd->add_option("--variant", soft.variant, "unconstrained, sum-one or ball");
  soft_cmd->add_option("--classes", soft.classes);
  soft_cmd->add_option("--dims", soft.dims);
  soft_cmd->add_option("--seed", soft.seed);
  soft_cmd->add_option("--eta", soft.eta, "Step for the one-step parameter update");
  soft_cmd->add_option("--t", soft.t, "Barrier parameter for the ball variant");
  soft_cmd->add_option("--class", soft.class_index, "Zero-based class index");
  soft_cmd->add_option("--grid", soft.grid, "Contour grid points per axis");
  soft_cmd->add_option("--extent", soft.extent, "Contour grid half-width");

  Bilevel bil;
  bil.err = &err;
  auto* bil_cmd = app.add_subcommand("bilevel", "Place soft-max maximizers on the unit circle");
  bil_cmd->add_option("--seed", bil.seed);
  bil_cmd->add_option("--classes", bil.classes);
  bil_cmd->add_option("--eta", bil.eta);
  bil_cmd->add_option("--max-iters", bil.max_iters);
  bil_cmd->add_option("--tol", bil.tol);
  bil_cmd->add_option("--barrier-t", bil.barrier_t, "Final barrier parameter of the lower solves");
  bil_cmd->add_option("--max-halvings", bil.max_halvings);
  bil_cmd->add_flag("--parallel", bil.parallel, "Solve per-class lower problems concurrently");
  bil_cmd->add_option("--summary", bil.summary_path, "JSON summary path (default: stderr)");

  GradcheckCmd grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Run every derivative cross-check");
  grad_cmd->add_option("--seed", grad.seed);
  grad_cmd->add_option("--format", grad.format, "json or csv");
  grad_cmd->add_option("--inject-fault", grad.fault, "none or kkt-sign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  Command* cmd = nullptr;
  if (three_cmd->parsed()) cmd = &three;
  if (pos_cmd->parsed()) cmd = &pos;
  if (soft_cmd->parsed()) cmd = &soft;
  if (bil_cmd->parsed()) cmd = &bil;
  if (grad_cmd->parsed()) cmd = &grad;

  std::ofstream file;
  if (!output.empty()) {
    file.open(output);
    if (!file) {
      err << "error: cannot open " << output << '\n';
      return kUsage;
    }
  }
  std::ostream& sink = output.empty() ? out : file;
  try {
    return cmd->execute(sink);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::kDivergenceDetected) return kDivergence;
    return kSolverFailure;
  }
}

}  // namespace diffopt::cli
