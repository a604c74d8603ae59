#pragma once

#include <iosfwd>

namespace mcdag {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitGuard = 2, kExitInternal = 3 };

/// Entry point of the `mcdag` tool: solve, width, compile, check, gen.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mcdag
