#pragma once

// The `ctxsp` command line: generate, train, eval, parse, inspect-features.

#include <iosfwd>

namespace ctxsp::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kInputOutput = 3,
  kInternal = 4,
};

/// Runs one command. Normal output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace ctxsp::cli
