#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pbshm::cli {

/// Exit codes: 0 success, 1 user-input error, 2 internal invariant violation.
enum Exit : int { ok = 0, user_error = 1, internal_error = 2 };

/// Runs the command line `args` (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pbshm::cli
