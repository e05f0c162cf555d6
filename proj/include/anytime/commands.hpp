#pragma once

// In-process command-line frontend. tools/main.cpp is a thin wrapper.

#include <iosfwd>
#include <string>
#include <vector>

namespace anytime {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of the command-line contract.
enum ExitCode : int { exit_ok = 0, exit_validation = 1, exit_runtime = 2 };

/// Runs one invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace anytime
