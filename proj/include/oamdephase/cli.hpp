#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace oamd::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kSuccess = 0, kRuntimeError = 1, kUsageError = 2, kFitNotConverged = 3 };

/// Runs the tool with argv-style arguments (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oamd::cli
