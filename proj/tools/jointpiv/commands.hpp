#pragma once

#include <CLI11.hpp>

namespace jointpiv::cli {

enum ExitCode : int { success = 0, numerical_failure = 1, usage_error = 2 };

/// Registers the four subcommands on `app`. Each one stores its exit code
/// in `status` when it runs.
void register_commands(CLI::App& app, int& status);

}  // namespace jointpiv::cli
