#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "diffopt/examples.hpp"

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "diffopt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = diffopt::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(invoke({}).code, diffopt::cli::kUsage);
  EXPECT_EQ(invoke({"no-such-command"}).code, diffopt::cli::kUsage);
  EXPECT_EQ(invoke({"three-minima", "--bogus"}).code, diffopt::cli::kUsage);
  EXPECT_EQ(invoke({"three-minima", "--x-min", "3", "--x-max", "1"}).code, diffopt::cli::kUsage);
  EXPECT_EQ(invoke({"positivity", "--t", "1,abc"}).code, diffopt::cli::kUsage);
  EXPECT_EQ(invoke({"softmax", "--variant", "simplex"}).code, diffopt::cli::kUsage);
  EXPECT_EQ(invoke({"gradcheck", "--format", "xml"}).code, diffopt::cli::kUsage);
}

TEST(Cli, HelpSucceeds) {
  const CliRun r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("bilevel"), std::string::npos);
}

TEST(Cli, ThreeMinimaGridHasThreeBranches) {
  const CliRun r = invoke({"three-minima", "--x-min", "0.5", "--x-max", "3", "--steps", "50"});
  ASSERT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 151u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"x", "branch", "g", "g_prime", "g_prime_fd"}));
}

TEST(Cli, ThreeMinimaZeroBranchIsFlat) {
  const CliRun r = invoke({"three-minima", "--x-min", "1", "--x-max", "2", "--steps", "2"});
  ASSERT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  EXPECT_EQ(rows[1][0], "1");
  EXPECT_EQ(rows[1][1], "0");
  EXPECT_EQ(std::stod(rows[1][2]), 0.0);
  EXPECT_EQ(std::stod(rows[1][3]), 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_NEAR(std::stod(rows[i][3]), std::stod(rows[i][4]), 1e-6);
  }
}

TEST(Cli, ThreeMinimaFiniteDifferenceColumnAgrees) {
  const CliRun r = invoke({"three-minima"});
  const auto rows = csv_rows(r.out);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double g_prime = std::stod(rows[i][3]);
    const double fd = std::stod(rows[i][4]);
    EXPECT_LE(std::abs(g_prime - fd), 1e-5 * std::max(1.0, std::abs(fd))) << "row " << i;
  }
}

TEST(Cli, PositivityGradientApproachesOne) {
  const CliRun r = invoke({"positivity", "--x-min", "0", "--x-max", "1", "--steps", "2", "--t",
                           "1,10,100,1000"});
  ASSERT_EQ(r.code, 0);
  double previous = 0.0;
  for (const auto& row : csv_rows(r.out)) {
    if (row[0] != "1") continue;
    const double dg_t = std::stod(row[5]);
    EXPECT_GT(dg_t, previous);
    EXPECT_LT(dg_t, 1.0);
    previous = dg_t;
  }
  EXPECT_GT(previous, 0.99);
}

TEST(Cli, PositivityRows) {
  const CliRun r = invoke({"positivity", "--x-min", "-1", "--x-max", "1", "--steps", "3", "--t",
                        "1,1000"});
  ASSERT_EQ(r.code, 0);
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 7u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double x = std::stod(rows[i][0]);
    const double t = std::stod(rows[i][1]);
    const double g_t = std::stod(rows[i][3]);
    EXPECT_GT(g_t, 0.0);
    if (x == 1.0 && t == 1000.0) EXPECT_LE(std::abs(g_t - 1.0), 0.05);
  }
}

TEST(Cli, SoftmaxVariants) {
  for (const std::string variant : {"unconstrained", "sum-one", "ball"}) {
    const CliRun r = invoke({"softmax", "--variant", variant, "--seed", "0", "--grid", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto doc = nlohmann::json::parse(r.out);
    const std::vector<double> y = doc["x_star_before"];
    ASSERT_EQ(y.size(), 2u);
    EXPECT_TRUE(doc["gradcheck"]["pass"].get<bool>());
    EXPECT_LE(doc["closed_form_vs_kernel"].get<double>(), 1e-8);
    EXPECT_EQ(doc["derivatives"]["a"].size(), 10u);
    EXPECT_EQ(doc["contour"]["likelihood_before"].size(), 5u);
    if (variant == "sum-one") EXPECT_NEAR(y[0] + y[1], 1.0, 1e-8);
    if (variant == "ball") EXPECT_LT(std::hypot(y[0], y[1]), 1.0);
  }
}

TEST(Cli, SoftmaxUnboundedClassFailsWithSolverCode) {
  const diffopt::examples::SoftmaxParams params = diffopt::examples::random_softmax(10, 2, 0);
  int unbounded = -1;
  for (int c = 0; c < 10 && unbounded < 0; ++c) {
    if (!diffopt::examples::class_bounded(params, c,
                                          diffopt::examples::SoftmaxVariantKind::kUnconstrained)) {
      unbounded = c;
    }
  }
  ASSERT_GE(unbounded, 0);
  const CliRun r = invoke({"softmax", "--class", std::to_string(unbounded)});
  EXPECT_EQ(r.code, diffopt::cli::kSolverFailure);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, BilevelSummaryAndCurve) {
  const std::filesystem::path summary =
      std::filesystem::temp_directory_path() / "diffopt_cli_summary.json";
  const CliRun r = invoke({"bilevel", "--seed", "0", "--summary", summary.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"iter", "objective", "grad_norm"}));
  EXPECT_LE(std::stod(rows.back()[1]), 1e-6);
  for (std::size_t i = 2; i < rows.size(); ++i) {
    EXPECT_LT(std::stod(rows[i][1]), std::stod(rows[i - 1][1])) << "iteration " << rows[i][0];
  }
  std::ifstream in(summary);
  const auto doc = nlohmann::json::parse(in);
  EXPECT_EQ(doc["stop_reason"], "objective_tolerance");
  ASSERT_EQ(doc["solutions"].size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const std::vector<double> g = doc["solutions"][i];
    const std::vector<double> t = doc["targets"][i];
    EXPECT_LE(std::hypot(g[0] - t[0], g[1] - t[1]), 2e-3);
  }
  std::filesystem::remove(summary);
}

TEST(Cli, BilevelSummaryDefaultsToErrorStream) {
  const CliRun r = invoke({"bilevel", "--max-iters", "3"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.err)["iterations"], 3);
}

TEST(Cli, GradcheckExitCodes) {
  const CliRun ok = invoke({"gradcheck", "--format", "json"});
  EXPECT_EQ(ok.code, 0);
  const auto doc = nlohmann::json::parse(ok.out);
  EXPECT_TRUE(doc["all_pass"].get<bool>());
  bool has_method_agreement = false;
  for (const auto& row : doc["checks"]) {
    has_method_agreement = has_method_agreement ||
                           row["check"].get<std::string>().find("nullspace vs kkt") !=
                               std::string::npos;
  }
  EXPECT_TRUE(has_method_agreement);
  const CliRun bad = invoke({"gradcheck", "--inject-fault", "kkt-sign", "--format", "csv"});
  EXPECT_EQ(bad.code, diffopt::cli::kCheckFailed);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
}

TEST(Cli, OutputFlagWritesFile) {
  const std::filesystem::path path =
      std::filesystem::temp_directory_path() / "diffopt_cli_output.csv";
  const CliRun r = invoke({"--output", path.string(), "three-minima", "--steps", "4"});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::stringstream text;
  text << in.rdbuf();
  EXPECT_EQ(csv_rows(text.str()).size(), 13u);
  std::filesystem::remove(path);
}

TEST(Cli, RepeatedRunsAreByteIdentical) {
  const std::vector<std::vector<std::string>> commands = {
      {"three-minima"},
      {"positivity"},
      {"softmax", "--variant", "ball", "--seed", "4"},
      {"bilevel", "--seed", "0", "--max-iters", "20", "--parallel"},
      {"gradcheck", "--seed", "2"}};
  for (const auto& cmd : commands) {
    const CliRun a = invoke(cmd);
    const CliRun b = invoke(cmd);
    EXPECT_EQ(a.code, b.code);
    EXPECT_EQ(a.out, b.out) << cmd.front();
    EXPECT_EQ(a.err, b.err) << cmd.front();
  }
}

}  // namespace
