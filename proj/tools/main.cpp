#include "hteselect/cli.hpp"
#include "hteselect/version.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"hte_select: benchmarking lab for treatment-effect model selection"};
    app.set_version_flag("--version", std::string(hteselect::kVersion));
    app.require_subcommand(1);

    std::string config_path;
    hteselect::CliOverrides overrides;
    std::optional<int> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;

    CLI::App* run = app.add_subcommand("run", "run an experiment plan and write result tables");
    run->add_option("config", config_path, "path to a JSON run configuration")->required();
    run->add_option("--workers", workers, "worker threads (overrides config)");
    run->add_option("--seed", seed, "master seed (overrides config)");
    run->add_option("--output", output, "output directory (overrides config)");

    CLI::App* validate = app.add_subcommand("validate", "parse and validate a configuration");
    validate->add_option("config", config_path, "path to a JSON run configuration")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        overrides.workers = workers;
        overrides.master_seed = seed;
        overrides.output_dir = output;
        return hteselect::cmd_run(config_path, overrides, std::cout, std::cerr);
    }
    return hteselect::cmd_validate(config_path, std::cout, std::cerr);
}
