#pragma once

#include <string>
#include <vector>

namespace profpipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one subcommand. argv[0] is the program name.
int run_cli(const std::vector<std::string>& argv);

}  // namespace profpipe::cli
