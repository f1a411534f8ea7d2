#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace labelgcn {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_usage = 1,       ///< bad flags, config or missing files
    exit_data = 2,        ///< malformed dataset or shape mismatch
    exit_divergence = 3,  ///< training diverged or a check failed its threshold
};

/// Runs one `labelgcn` invocation. `args` excludes the program name.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace labelgcn
