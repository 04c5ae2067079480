#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "factsum/error.hpp"

namespace factsum {

enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitInput = 2,
    kExitRepairExhausted = 3,
    kExitUnresolved = 4,
    kExitTransport = 5,
    kExitEmpty = 6,
};

int exit_code_for(ErrorKind kind) noexcept;

/// Runs one CLI invocation. `args` excludes the program name. Messages go to `out` and `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace factsum
