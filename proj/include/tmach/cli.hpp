#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tmach {

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kDataError = 2;
inline constexpr int kSolverError = 3;
}  // namespace exit_code

/// Runs one command. `args` excludes the program name. Diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tmach
