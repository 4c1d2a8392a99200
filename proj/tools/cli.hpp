#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace concord::cli {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitBackend = 2;

/// Runs one command line (without the program name). Artifacts go to files,
/// JSON summaries to `out`, diagnostics and usage to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace concord::cli
