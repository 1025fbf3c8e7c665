#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace vth::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Runs one subcommand; args[0] is the program name. Summaries go to out,
// diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace vth::cli
