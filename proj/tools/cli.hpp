#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace chorus::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace chorus::cli
