#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "yieldmsm/commands.hpp"

int main(int argc, char** argv) {
    using namespace yieldmsm::cli;

    CLI::App app{"Multi-state Markov modelling of daily yield states"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1, 1);

    std::string config;
    Overrides overrides;
    std::string algorithm;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::string out;

    const std::map<std::string, std::string> about = {
        {"preprocess", "Build the daily analysis table and panel from sensor and harvest files"},
        {"fit", "Fit the multi-state model by maximum likelihood"},
        {"report", "Write tables for a previously saved fit"},
        {"predict", "Transition probabilities over a horizon at a covariate setting"},
        {"simulate", "Simulate a daily panel under configured parameters"},
        {"scenario", "Compare forecasts and sojourns between two covariate settings"},
    };

    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config", config, "YAML run configuration")->required();
        sub->add_option("--algorithm", algorithm, "bfgs, nelder-mead or both")
            ->check(CLI::IsMember({"bfgs", "nelder-mead", "nelder_mead", "both"}));
        sub->add_option("--horizon", horizon, "Forecast horizon in days");
        sub->add_option("--seed", seed, "Random seed");
        sub->add_option("--out", out, "Output directory");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    auto* sub = app.get_subcommands().front();
    if (sub->count("--algorithm")) overrides.algorithm = algorithm;
    if (sub->count("--horizon")) overrides.horizon = horizon;
    if (sub->count("--seed")) overrides.seed = seed;
    if (sub->count("--out")) overrides.out = out;
    return run_command(sub->get_name(), config, overrides, std::cout, std::cerr);
}
