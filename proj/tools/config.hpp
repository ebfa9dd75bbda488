#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tpmwork/params.hpp"
#include "tpmwork/propagator.hpp"
#include "tpmwork/sweep.hpp"
#include "tpmwork/workstats.hpp"

namespace tpmwork::cli {

/// Everything a run reads from the config file. Grid keys accept a scalar or a list; a
/// scalar also sets the model value, a list sets the model value to its first entry.
struct RunConfig {
    ModelParams model;
    PropagatorConfig propagator;
    EnergyBinning binning;
    std::optional<std::vector<double>> xi, alpha, lambda, energies;
    std::optional<std::vector<std::size_t>> n_list;
    std::optional<std::size_t> eigenstate_count;
    std::filesystem::path output = "results";
    std::size_t workers = 1;
    bool plots = true;
    std::uint64_t jr0_trials = 20;

    std::vector<std::string> violations() const;
};

/// All accepted keys, in echo order.
const std::vector<std::string>& known_keys();

/// Closest known key: prefix or substring matches first, then edit distance <= 3.
std::optional<std::string> suggest_key(const std::string& unknown);

/// Parses and validates. Throws ConfigError carrying line/column for syntax and type errors,
/// every unknown key (with a suggestion) and every domain violation.
RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::string& source = "<config>");

/// `key=value` with a YAML value, applied on top of a parsed config (no validation).
void apply_override(RunConfig& config, const std::string& assignment);

/// Throws ConfigError listing every violation.
void validate(const RunConfig& config);

/// Effective configuration as YAML; grid keys not set explicitly are omitted.
std::string to_yaml(const RunConfig& config);

/// Preset grids of `kind` overridden by the explicit grid keys of `config`.
sweep::SweepSpec make_spec(const RunConfig& config, sweep::Experiment kind);

}  // namespace tpmwork::cli
