#ifndef MULTISTOP_CLI_HPP
#define MULTISTOP_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace multistop::cli {

/// Process exit codes.
enum ExitCode : int {
    kOk = 0,
    kInputError = 2,
    kPropertyFailure = 3,
    kBudgetRefusal = 4,
};

/**
 * Entry point of the `multistop` tool: subcommands snell, double, verify,
 * exchange. Options may also come from a JSON file given by --config
 * (flat keys named like the long flags, optionally nested under the
 * subcommand name); flags on the command line win. --threads falls back to
 * MULTISTOP_THREADS, then to the hardware thread count.
 */
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace multistop::cli

#endif  // MULTISTOP_CLI_HPP
