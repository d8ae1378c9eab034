#pragma once

#include <iosfwd>

namespace dash::cli {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kProviderFailure = 3 };

/// Full command-line entry point; writes normal output to `out` and
/// diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dash::cli
