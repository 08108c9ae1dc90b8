// SPDX-License-Identifier: Apache-2.0
//
// The relmusic command-line tool as a library, so tests can drive it in-process.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relmusic::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,  // a verification command ran and found a mismatch
  kExitInvalid = 2,      // bad usage, invalid input or config, refused request
  kExitRuntime = 3,      // I/O failure, divergence, other runtime errors
};

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace relmusic::cli
