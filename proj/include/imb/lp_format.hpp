#pragma once

// CPLEX-style LP text files: Minimize/Maximize, Subject To, Bounds,
// Binaries, End. General integers and quadratic terms are not supported.

#include <string>
#include <string_view>

#include "imb/milp.hpp"

namespace imb::milp {

struct LpFile {
  MilpProblem problem;
  // The stored objective is always minimized; a maximize file is negated.
  bool maximize = false;
};

// Throws ValidationError with a line number on malformed input.
LpFile parse_lp(std::string_view text);
std::string write_lp(const MilpProblem& problem);

}  // namespace imb::milp
