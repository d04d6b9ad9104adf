#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hybridsig::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command line (args[0] is the program name). Normal output goes to
/// `out`; logs, the resolved config and errors go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hybridsig::cli
