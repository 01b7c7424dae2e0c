#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparse_infer {

/// Exit status of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitNumerical = 1, kExitUsage = 2 };

/// Runs one subcommand (fit, post-fit, iv, supscore, plm, mc, eig-diag).
/// `args` excludes the program name. Results go to `out` and to the files
/// named by --out / --out-csv; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sparse_infer
