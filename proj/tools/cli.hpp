#pragma once

#include <ostream>

namespace ocan::cli {

// Process exit codes, one per failure class.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,     // unexpected internal error
  kUsage = 2,       // unknown flag, missing or invalid option
  kIo = 3,          // missing input file, failed write
  kParse = 4,       // malformed dataset
  kCheckpoint = 5,  // corrupt or incompatible checkpoint
  kNumeric = 6,     // divergence or non-finite values
  kArgument = 7,    // well-formed but invalid request (e.g. too few users)
};

// Errors go to `err` as a single line:
//   ocan: error kind=<kind> exit=<code> message=<text>
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ocan::cli
