#pragma once

// Command-line surface: solve, simulate, analyze, moderator, llm-run,
// report, evidence, power, certify.

#include <ostream>
#include <string>
#include <vector>

namespace deltalab {

/// `args` excludes the program name. Returns the process exit code:
/// 0 success, 1 data/convergence error, 2 usage error. Error names go to
/// `err` so scripts can match on them.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deltalab
