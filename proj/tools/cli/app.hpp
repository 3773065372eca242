#pragma once

#include <iosfwd>

namespace judgekit::cli {

// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;    // bad flags, config or unreadable input
inline constexpr int kExitPartial = 2;  // ran, but some records or requests failed

/// Parses argv and runs one subcommand. Never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace judgekit::cli
