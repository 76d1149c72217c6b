#pragma once

#include <iosfwd>

namespace rkhsmm::cli {

enum exit_code : int {
    success = 0,
    internal_error = 1,
    usage_error = 2,
    io_failure = 3,
    parse_failure = 4,
    numeric_error = 5,
};

/// Runs the command line `argv`. Regular output goes to `out`; diagnostics and
/// the one-line JSON error record go to `err`. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace rkhsmm::cli
