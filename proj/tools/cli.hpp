#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drbart {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitInput = 3, kExitRuntime = 4 };

/// Runs the tool on argv-style arguments (args[0] is the program name).
/// Tabular results go to `out` unless redirected with --out; diagnostics
/// and the single-line error message go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace drbart
