#pragma once

#include <iosfwd>

namespace abo::cli {

enum ExitCode : int { ok = 0, usage = 1, data_error = 2, verification_failed = 3 };

// Entry point of the abo_cli tool. Output goes to out, diagnostics to err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace abo::cli
