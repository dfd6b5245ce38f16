#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fanet::cli {

/// Exit codes: 0 success, 1 usage / validation error, 2 runtime or
/// numerical error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker-thread cap from FANET_THREADS (default 1).
std::size_t thread_cap();

}  // namespace fanet::cli
