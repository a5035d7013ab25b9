#pragma once

#include <string>
#include <vector>

namespace fpr {

// Entry point behind the `fpr` binary. Subcommands: generate, run, verify,
// ensemble, report. Returns 0 on success, 1 on usage/validation errors, 2 on
// oracle or convergence failures.
int cli_dispatch(int argc, const char* const* argv);
int cli_dispatch(const std::vector<std::string>& args);

}  // namespace fpr
