#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailedts::cli {

/// Bad flags, config keys or values. Maps to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A fully resolved invocation: the verb path ("ingest", "bench predict", ...) and every option
/// of that verb with its final value (flag, else config file, else default).
struct RunConfig {
    std::string verb;
    nlohmann::json options;
};

/// Outcome of argument parsing: either a config to run or text to print (help) and an exit code.
struct ParsedArgs {
    std::optional<RunConfig> config;
    std::string message;
    int exit_code = 0;
};

/// Parses argv (without the program name). Flags override `--config FILE` values; unknown config
/// keys, type mismatches and missing required options throw ValidationError.
ParsedArgs load_config(const std::vector<std::string>& args);

/// Executes a resolved config. Writes the human summary to `out` and JSON log lines to `err`.
void execute(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Full entry point. Returns 0 on success, 1 on validation errors, 2 on runtime failures.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tailedts::cli
