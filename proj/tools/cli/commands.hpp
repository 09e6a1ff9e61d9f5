#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fabconf::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 1,        // invalid or inconsistent flags
  kBadInput = 2,     // malformed CSV, unknown area id, invalid data
  kRankDeficient = 3,
  kFailure = 4,      // numerical or other runtime failure
};

/// Runs the command line `args` (args[0] is the program name) writing
/// results to `out` and diagnostics to `err`. Returns an ExitCode.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fabconf::cli
