#pragma once

#include "run_context.hpp"

#include <CLI11.hpp>

#include <functional>
#include <string>
#include <vector>

namespace kinlim::cli {

struct Command {
    CLI::App* app = nullptr;
    // Returns the exit code; throws ValidationError / NumericalError on failure.
    std::function<int(RunContext&)> run;
    // Bound value of --config, or nullptr.
    std::string* config = nullptr;
};

// Adds the subcommands to app. Parameter storage lives inside the returned closures.
std::vector<Command> add_commands(CLI::App& app);

// Shortest round-trip decimal form, used for option defaults.
std::string repr(double x);

}  // namespace kinlim::cli
