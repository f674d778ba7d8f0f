#pragma once

#include <exception>
#include <iosfwd>

namespace sgxmr::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,        // bad flags, unreadable files, bad block size
  kIntegrity = 2,    // AuthenticationError, FormatError, RecordTooLarge
  kUserCode = 3,     // UdfError, DimensionMismatch
  kShape = 4,        // ShapeMismatch
  kLeaky = 5,        // trace check found a divergence; trace diff found a difference
};

/// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

/// Parses argv and runs the selected subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sgxmr::cli
