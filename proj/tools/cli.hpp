#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace oodcrl::cli {

/// Stable process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `oodcrl` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace oodcrl::cli
