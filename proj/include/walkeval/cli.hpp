#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace walkeval {

/// Runs one command line (without the program name). Results go to `out`;
/// failures go to `err` as one JSON object. Returns the process exit code:
/// 0 ok, 2 usage, 3 validation, 4 backend, 5 I/O.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace walkeval
