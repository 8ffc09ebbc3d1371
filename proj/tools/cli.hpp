#pragma once

// Batch front end: train, eval, oracle and compare subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <iosfwd>

namespace pdt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

// Output directory when neither --out nor this variable is given: "pdt_out".
inline constexpr const char* kOutDirVariable = "PDT_OUT_DIR";

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdt::cli
