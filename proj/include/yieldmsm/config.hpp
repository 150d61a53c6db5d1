#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "yieldmsm/model.hpp"
#include "yieldmsm/optim.hpp"
#include "yieldmsm/pipeline.hpp"

namespace yieldmsm {

/// YAML document with `states`, `transitions` ("r->s") and `covariates`.
ModelSpec parse_model_spec(std::string_view text);
std::string format_model_spec(const ModelSpec& spec);

enum class AlgorithmChoice { bfgs, nelder_mead, both };
AlgorithmChoice parse_algorithm_choice(std::string_view text);
std::string_view to_string(AlgorithmChoice choice);

struct TransitionEffects {
    double rate = 0.0;                    // q⁰ in day⁻¹
    std::map<std::string, double> betas;  // missing covariates mean 0
};

struct SimulationConfig {
    int subjects = 24;
    int days = 62;
    int groups = 4;                     // subjects per group share daily covariates
    std::optional<int> initial_state;   // uniform over states when absent
    std::map<std::string, TransitionEffects> parameters;  // keyed by "r->s"
};

struct RunConfig {
    std::string text;  // verbatim config, echoed into the manifest
    std::string base_dir;

    std::optional<std::string> sensor_csv;
    std::optional<std::string> harvest_csv;
    std::optional<std::string> panel_csv;
    std::optional<std::string> fit_json;

    ModelSpec model = ModelSpec::three_state_constrained({});
    AlgorithmChoice algorithm = AlgorithmChoice::bfgs;
    FitOptions fit;
    double horizon = 30.0;
    std::map<std::string, double> predict_covariates;
    std::map<std::string, double> scenario_base;
    std::map<std::string, double> scenario_offsets;
    pipeline::PipelineOptions preprocess;
    SimulationConfig simulate;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    bool seed_defaulted = true;

    /// Relative paths resolve against the config file's directory.
    std::string resolve(const std::string& path) const;
    CovariateVector covariates_from(const std::map<std::string, double>& values) const;
    /// Simulation parameters in the model's layout.
    ParameterSet simulation_parameters() const;
};

/// Strict parse: unknown keys, malformed transitions and unknown covariates
/// are rejected with "line N: ..." messages.
RunConfig parse_config(std::string_view text, std::string base_dir = ".");
RunConfig load_config(const std::string& path);

}  // namespace yieldmsm
