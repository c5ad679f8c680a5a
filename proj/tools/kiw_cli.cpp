/// @file kiw_cli.cpp
/// @brief Command-line entry point: kiw-verify | advect | kelvin | convergence | diagnostics.

#include "kiw/runner.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Kunita-Ito-Wentzell verification runner"};
    app.require_subcommand(1);
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    int workers = 0;
    for (const auto& name : kiw::command_names()) {
        CLI::App* sub = app.add_subcommand(name, "run the " + name + " suite");
        sub->add_option("--config", config, "experiment config (JSON)")->required();
        sub->add_option("--seed", seed, "override the master seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--workers", workers, "worker threads (0 = available parallelism)")->check(CLI::NonNegativeNumber);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kiw::kExitConfig;
    }
    CLI::App* sub = app.get_subcommands().front();
    std::optional<std::uint64_t> seed_override;
    std::optional<int> workers_override;
    if (sub->count("--seed") > 0) seed_override = seed;
    if (sub->count("--workers") > 0) workers_override = workers;
    return kiw::run_from_file(sub->get_name(), config, out, seed_override, workers_override, std::cout);
}
