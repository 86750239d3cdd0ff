#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace sidekit::cli {

/// Runs one command line (without the program name).
/// Exit codes: 0 success or help, 1 pipeline error, 2 usage error.
int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err);

}  // namespace sidekit::cli
