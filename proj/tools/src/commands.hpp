#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace wrecon::cli {

/// Runs one command line (without the program name) and returns the process
/// exit code: 0 ok, 2 configuration, 3 data, 4 numeric, 5 I/O.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wrecon::cli
