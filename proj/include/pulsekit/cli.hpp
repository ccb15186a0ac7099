#pragma once

#include <string>
#include <vector>

namespace pulsekit::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsageError = 1;
inline constexpr int kDataError = 2;

/// Entry point of the `pulsekit` command. Returns the process exit code.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace pulsekit::cli
