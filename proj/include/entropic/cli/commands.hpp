#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace entropic::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitSolver = 2;

// Runs one subcommand on args (without the program name). Tables go to --out or `out`;
// the solver report goes to --report, or beside --out. Returns kExitOk, kExitInvalid
// on bad input or usage, and kExitSolver on solver failure with the report still written.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace entropic::cli
