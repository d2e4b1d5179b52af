#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace baaf::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kDataError = 3,
  kDegenerate = 4,
};

/// Runs the tool with argv-style arguments (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace baaf::cli
