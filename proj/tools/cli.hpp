#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ttifair::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitBias = 1;
inline constexpr int kExitError = 2;

// Runs the ttifair command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ttifair::cli
