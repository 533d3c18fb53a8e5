#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lightxml {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInternal = 3;

/// Runs the command line tool. `args` excludes the program name. Returns the exit
/// code: 0 success, 2 usage or configuration error, 3 internal invariant violation.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lightxml
