#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"

namespace tpmwork::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kConfigError = 2, kPartial = 3, kNumericalError = 4 };

/// Worker-count override read from the environment.
inline constexpr const char* kWorkersEnv = "TPMWORK_WORKERS";

/// Experiments accepted by `run`.
const std::vector<std::string>& experiment_names();

struct Overrides {
    std::vector<std::string> assignments;  ///< --set key=value, in order
    std::optional<std::filesystem::path> output;
    std::optional<std::size_t> workers;
    bool no_plots = false;
};

/// Precedence, lowest first: built-in defaults and experiment presets, the config file,
/// TPMWORK_WORKERS, --set assignments, dedicated flags. Validates the result.
RunConfig resolve_config(const std::optional<std::filesystem::path>& file, const Overrides& overrides);

/// Prints the effective configuration; nonzero when the file is invalid.
int cmd_validate(const std::filesystem::path& file, std::ostream& out, std::ostream& err);

/// Runs one experiment and returns an ExitCode.
int cmd_run(const std::string& experiment, const RunConfig& config, bool dry_run, std::ostream& out,
            std::ostream& err);

}  // namespace tpmwork::cli
