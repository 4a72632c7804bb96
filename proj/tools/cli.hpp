#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace epl::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2, kIo = 3 };

// runs one invocation; args exclude the program name
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace epl::cli
