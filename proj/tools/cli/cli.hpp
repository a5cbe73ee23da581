#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tokdiff::cli {

// Runs one command line (args excludes the program name). Exit codes: 0
// success, 1 domain error, 2 usage error. Diagnostics go to `err` prefixed
// with "error:".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace tokdiff::cli
