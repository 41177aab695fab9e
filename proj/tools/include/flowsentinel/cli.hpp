#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace flowsentinel::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsageError = 1,
  kDataError = 2,
  kModelFileError = 3,
};

// Runs one of the train / evaluate / predict / inspect subcommands. `args`
// excludes the program name. Results go to `out`, progress and diagnostics
// to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flowsentinel::cli
