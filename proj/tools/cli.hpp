#pragma once

#include <iosfwd>

namespace stargraph::cli {

/// Exit codes: 0 success, 1 usage, 2 data error, 3 runtime error.
enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stargraph::cli
