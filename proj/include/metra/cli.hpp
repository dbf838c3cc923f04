#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace metra {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalidInput = 2;
inline constexpr int kExitInvalidMesh = 3;
inline constexpr int kExitSolverFailure = 4;

// Runs the command line tool. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace metra
