#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ibias {

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_solver = 2, exit_admissibility = 3 };

// args excludes the program name
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "a:b:step" or "x,y,z"
std::vector<double> parse_grid(const std::string& text);

}  // namespace ibias
