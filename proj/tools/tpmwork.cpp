#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "tpmwork/errors.hpp"
#include "tpmwork/sweep.hpp"
#include "tpmwork/version.hpp"

namespace {

extern "C" void on_interrupt(int) { tpmwork::sweep::stop_requested().store(true); }

}  // namespace

int main(int argc, char** argv) {
    using namespace tpmwork::cli;

    CLI::App app{"Work statistics and the Jarzynski relation in a driven spin-bath model"};
    app.set_version_flag("--version", std::string(tpmwork::kVersion));
    app.require_subcommand(1);

    std::string config_path;
    auto* validate = app.add_subcommand("validate", "Check a config file and print the effective configuration");
    validate->add_option("config", config_path, "YAML config file")->required()->check(CLI::ExistingFile);

    std::string experiment;
    std::string run_config;
    Overrides overrides;
    std::string output;
    std::size_t workers = 0;
    bool dry_run = false;
    auto* run = app.add_subcommand("run", "Run one experiment");
    run->add_option("experiment", experiment, "Experiment name")
        ->required()
        ->check(CLI::IsMember(experiment_names()));
    run->add_option("-c,--config", run_config, "YAML config file")->check(CLI::ExistingFile);
    run->add_option("--set", overrides.assignments, "Override one key, e.g. --set alpha=[0.1,0.2]")
        ->allow_extra_args(false);
    auto* out_opt = run->add_option("-o,--out", output, "Output directory");
    auto* workers_opt = run->add_option("-w,--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    run->add_flag("--dry-run", dry_run, "Print the work to be done and exit");
    run->add_flag("--no-plots", overrides.no_plots, "Skip SVG figures");
    run->footer(
        "Precedence: defaults and experiment presets < config file < " + std::string(kWorkersEnv) +
        " < --set < --out/--workers/--no-plots.\n"
        "Exit codes: 0 success, 1 I/O error, 2 config error, 3 partial completion, 4 numerical failure.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    if (validate->parsed()) return cmd_validate(config_path, std::cout, std::cerr);

    if (*out_opt) overrides.output = output;
    if (*workers_opt) overrides.workers = workers;
    RunConfig config;
    try {
        config = resolve_config(run_config.empty() ? std::nullopt : std::optional<std::filesystem::path>(run_config),
                                overrides);
    } catch (const tpmwork::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kConfigError;
    }
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    return cmd_run(experiment, config, dry_run, std::cout, std::cerr);
}
