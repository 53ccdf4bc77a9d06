#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace narrownet {

// Runs one command line (without the program name). Returns the process
// exit code: 0 success, 1 domain error, 2 usage error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace narrownet
