#pragma once

#include <ostream>

namespace cellsim::cli {

enum ExitCode : int {
    kOk = 0,
    kToleranceExceeded = 1,
    kUsageError = 2,
    kNumericalError = 3,
    kIoError = 4,
};

/// Runs the `cellsim` command line: `run`, `oracle` or `compare`.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cellsim::cli
