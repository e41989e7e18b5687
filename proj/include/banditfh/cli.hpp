#pragma once

#include <ostream>

namespace banditfh {

/// Runs the command-line front end and returns the process exit code:
/// 0 success, 2 usage or argument error, 3 resource refusal or table
/// mismatch, 4 I/O failure, 1 internal error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace banditfh
