#pragma once

#include <string>
#include <vector>

namespace dgkd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // usage and configuration errors
inline constexpr int kExitRuntime = 3;  // training / data / io errors

/// Entry point behind the dgkd binary; args[0] is the program name.
/// Subcommands: run | sweep-t | compare-modes | report, with
/// --config <path> --out <dir> [--seeds s1,s2,...].
int run_cli(const std::vector<std::string>& args);

}  // namespace dgkd
