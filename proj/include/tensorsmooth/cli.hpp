#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tensorsmooth {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_bad_config = 2,
    exit_bad_data = 3,
    exit_non_convergence = 4,
};

/// Runs one command line (args[0] is the program name).  Results go to
/// `out` unless an output path is given, messages to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tensorsmooth
