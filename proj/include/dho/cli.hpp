#pragma once

#include <iosfwd>

namespace dho {

/// Exit statuses of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,     // I/O or numerical failure
  kExitValidation = 2,  // bad flags or parameters
  kExitTruncation = 3,  // TruncationLeak; message carries the suggested nmax
};

/// Parses argv and runs one subcommand. Data goes to `out` unless --out names
/// a file; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dho
