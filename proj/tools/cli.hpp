#pragma once
// Command-line front end. Kept out of main() so tests can drive it.
#include <ostream>
#include <string>
#include <vector>

namespace imb {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 2;
inline constexpr int kExitRuntime = 3;

// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace imb
