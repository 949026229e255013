#pragma once

#include <ostream>

namespace nehari {

/// Exit codes: 0 ok, 1 validation or audit failure, 2 configuration or input
/// error, 3 spectral failure, 4 solver failure.
enum ExitCode : int {
    kExitOk = 0,
    kExitValidation = 1,
    kExitConfig = 2,
    kExitSpectral = 3,
    kExitSolver = 4,
};

/// Entry point of the `nehari` tool; never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nehari
