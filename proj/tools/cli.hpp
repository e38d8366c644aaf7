#pragma once

#include <ostream>

namespace sphconv::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kNumerical = 3,
  kIo = 4,
};

/// Runs one `sphconv` invocation. argv[0] is the program name. Data and CSV go
/// to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sphconv::cli
