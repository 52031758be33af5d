#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ghmcw {

/// Exit codes of the experiment runner.
enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_runtime = 2 };

/// Entry point of the `ghmcw` tool: subcommands synth, train, eval, compare.
/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ghmcw
