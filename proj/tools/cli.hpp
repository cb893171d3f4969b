#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vqg::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kConfig = 2, kRuntime = 3 };

/// Runs `vqg <args...>`; args exclude the program name.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err, std::istream& in);

}  // namespace vqg::cli
