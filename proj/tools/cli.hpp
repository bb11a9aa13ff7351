#pragma once

#include <ostream>

namespace diffopt::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kCheckFailed = 1;
inline constexpr int kUsage = 2;
inline constexpr int kSolverFailure = 3;
inline constexpr int kDivergence = 4;

/// Runs one subcommand. Results go to `out` unless --output names a file;
/// diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace diffopt::cli
