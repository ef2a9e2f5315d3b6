#pragma once

#include <atomic>
#include <iosfwd>

namespace tunekit::cli {

/// Exit codes of the tunekit command.
enum ExitCode : int { kOk = 0, kUsage = 2, kObjectiveFailed = 3 };

/// Entry point shared by main() and the tests. `stop` ends `serve`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
        const std::atomic<bool>& stop);

}  // namespace tunekit::cli
