#include "yieldmsm/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "yieldmsm/error.hpp"

namespace yieldmsm {

namespace {

std::string at_line(const YAML::Node& node) {
    const auto mark = node.Mark();
    if (mark.line < 0) return "config";
    return "line " + std::to_string(mark.line + 1);
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& message) {
    throw InputError(at_line(node) + ": " + message);
}

void expect_map(const YAML::Node& node, const std::string& what) {
    if (!node.IsMap()) fail(node, "'" + what + "' must be a mapping");
}

void check_keys(const YAML::Node& node, const std::set<std::string>& allowed, const std::string& what) {
    expect_map(node, what);
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.contains(key)) fail(kv.first, "unknown key '" + key + "' in " + what);
    }
}

YAML::Node require(const YAML::Node& parent, const std::string& key, const std::string& what) {
    const auto node = parent[key];
    if (!node) fail(parent, "missing required key '" + key + "' in " + what);
    return node;
}

template <typename T>
T scalar(const YAML::Node& node, const std::string& what) {
    if (!node.IsScalar()) fail(node, "'" + what + "' must be a scalar");
    try {
        return node.as<T>();
    } catch (const YAML::BadConversion&) {
        fail(node, "'" + what + "' has an invalid value '" + node.Scalar() + "'");
    }
}

std::vector<std::string> string_list(const YAML::Node& node, const std::string& what) {
    if (!node.IsSequence()) fail(node, "'" + what + "' must be a list");
    std::vector<std::string> out;
    for (const auto& item : node) out.push_back(scalar<std::string>(item, what));
    return out;
}

std::map<std::string, double> covariate_map(const YAML::Node& node, const std::string& what,
                                            const ModelSpec& model) {
    expect_map(node, what);
    std::map<std::string, double> out;
    for (const auto& kv : node) {
        const auto name = kv.first.as<std::string>();
        if (!model.covariate_index(name)) fail(kv.first, "unknown covariate '" + name + "' in " + what);
        const double v = scalar<double>(kv.second, what + "." + name);
        if (!std::isfinite(v)) fail(kv.second, what + "." + name + " must be finite");
        out[name] = v;
    }
    return out;
}

ModelSpec model_from_node(const YAML::Node& node) {
    check_keys(node, {"states", "transitions", "covariates"}, "model");
    const auto states_node = require(node, "states", "model");
    const auto transitions_node = require(node, "transitions", "model");
    std::vector<std::string> covariates;
    if (node["covariates"]) covariates = string_list(node["covariates"], "model.covariates");

    std::vector<std::string> labels;
    try {
        labels = string_list(states_node, "model.states");
        StateSpace check(labels);
    } catch (const InputError& e) {
        if (std::string_view(e.what()).starts_with("line")) throw;
        fail(states_node, e.what());
    }
    if (!transitions_node.IsSequence()) fail(transitions_node, "'model.transitions' must be a list");
    std::vector<Transition> allowed;
    for (const auto& item : transitions_node) {
        try {
            allowed.push_back(Transition::parse(scalar<std::string>(item, "model.transitions")));
        } catch (const InputError& e) {
            if (std::string_view(e.what()).starts_with("line")) throw;
            fail(item, e.what());
        }
    }
    try {
        return ModelSpec(StateSpace(labels), TransitionStructure(allowed, static_cast<int>(labels.size())),
                         covariates);
    } catch (const InputError& e) {
        fail(node, e.what());
    }
}

}  // namespace

ModelSpec parse_model_spec(std::string_view text) {
    try {
        return model_from_node(YAML::Load(std::string(text)));
    } catch (const YAML::Exception& e) {
        throw InputError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
}

std::string format_model_spec(const ModelSpec& spec) {
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "states" << YAML::Value << YAML::Flow << spec.states().labels();
    std::vector<std::string> transitions;
    for (const auto& t : spec.transitions().allowed()) transitions.push_back(t.name());
    out << YAML::Key << "transitions" << YAML::Value << YAML::Flow << transitions;
    out << YAML::Key << "covariates" << YAML::Value << YAML::Flow << spec.covariate_names();
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

AlgorithmChoice parse_algorithm_choice(std::string_view text) {
    if (text == "both") return AlgorithmChoice::both;
    return parse_algorithm(text) == Algorithm::bfgs ? AlgorithmChoice::bfgs : AlgorithmChoice::nelder_mead;
}

std::string_view to_string(AlgorithmChoice choice) {
    switch (choice) {
        case AlgorithmChoice::bfgs: return "bfgs";
        case AlgorithmChoice::nelder_mead: return "nelder-mead";
        case AlgorithmChoice::both: return "both";
    }
    return "bfgs";
}

std::string RunConfig::resolve(const std::string& path) const {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p.string();
    return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

CovariateVector RunConfig::covariates_from(const std::map<std::string, double>& values) const {
    auto z = CovariateVector::zeros(model);
    for (const auto& [name, v] : values) z = z.with(name, v);
    return z;
}

ParameterSet RunConfig::simulation_parameters() const {
    if (simulate.parameters.empty()) throw InputError("simulate.parameters is not set");
    std::vector<double> baselines;
    std::vector<std::vector<double>> betas;
    for (const auto& t : model.transitions().allowed()) {
        auto it = simulate.parameters.find(t.name());
        if (it == simulate.parameters.end()) {
            throw InputError("simulate.parameters lacks transition " + t.name());
        }
        baselines.push_back(it->second.rate);
        std::vector<double> row(model.n_covariates(), 0.0);
        for (const auto& [name, b] : it->second.betas) row[*model.covariate_index(name)] = b;
        betas.push_back(std::move(row));
    }
    return ParameterSet::from_rates(model, baselines, betas);
}

RunConfig parse_config(std::string_view text, std::string base_dir) {
    RunConfig cfg;
    cfg.text = std::string(text);
    cfg.base_dir = std::move(base_dir);

    YAML::Node root;
    try {
        root = YAML::Load(cfg.text);
    } catch (const YAML::Exception& e) {
        throw InputError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsMap()) throw InputError("line 1: config must be a mapping");

    try {
        check_keys(root, {"model", "data", "preprocess", "fit", "horizon", "predict", "scenario",
                          "simulate", "output", "seed"},
                   "config");
        cfg.model = model_from_node(require(root, "model", "config"));

        if (const auto data = root["data"]) {
            check_keys(data, {"sensor", "harvest", "panel", "fit"}, "data");
            if (data["sensor"]) cfg.sensor_csv = scalar<std::string>(data["sensor"], "data.sensor");
            if (data["harvest"]) cfg.harvest_csv = scalar<std::string>(data["harvest"], "data.harvest");
            if (data["panel"]) cfg.panel_csv = scalar<std::string>(data["panel"], "data.panel");
            if (data["fit"]) cfg.fit_json = scalar<std::string>(data["fit"], "data.fit");
        }

        if (const auto pre = root["preprocess"]) {
            check_keys(pre, {"reference_greenhouse", "start_date", "days", "standardize", "fixed_effects",
                             "screening", "correlation_window"},
                       "preprocess");
            auto& p = cfg.preprocess;
            if (pre["reference_greenhouse"]) {
                p.reference_greenhouse = scalar<std::string>(pre["reference_greenhouse"], "preprocess.reference_greenhouse");
            }
            if (pre["start_date"]) {
                try {
                    p.start_day = pipeline::parse_date_days(scalar<std::string>(pre["start_date"], "preprocess.start_date"));
                } catch (const InputError& e) {
                    if (std::string_view(e.what()).starts_with("line")) throw;
                    fail(pre["start_date"], e.what());
                }
            }
            if (pre["days"]) {
                p.days = scalar<int>(pre["days"], "preprocess.days");
                if (*p.days <= 0) fail(pre["days"], "preprocess.days must be positive");
            }
            if (pre["standardize"]) p.standardize = string_list(pre["standardize"], "preprocess.standardize");
            if (pre["fixed_effects"]) p.fixed_effects = scalar<bool>(pre["fixed_effects"], "preprocess.fixed_effects");
            if (pre["screening"]) p.screening = string_list(pre["screening"], "preprocess.screening");
            if (pre["correlation_window"]) {
                p.correlation_window = scalar<int>(pre["correlation_window"], "preprocess.correlation_window");
                if (p.correlation_window < 3 || p.correlation_window % 2 == 0) {
                    fail(pre["correlation_window"], "correlation_window must be odd and >= 3");
                }
            }
            for (const auto* list : {&p.standardize, &p.screening}) {
                for (const auto& v : *list) {
                    try {
                        (void)pipeline::canonical_variable(v);
                    } catch (const InputError& e) {
                        fail(pre, e.what());
                    }
                }
            }
        }

        if (const auto f = root["fit"]) {
            check_keys(f, {"algorithm", "max_iterations", "gradient_tolerance", "function_tolerance",
                           "max_evaluations", "simplex_tolerance"},
                       "fit");
            if (f["algorithm"]) {
                try {
                    cfg.algorithm = parse_algorithm_choice(scalar<std::string>(f["algorithm"], "fit.algorithm"));
                } catch (const InputError& e) {
                    if (std::string_view(e.what()).starts_with("line")) throw;
                    fail(f["algorithm"], e.what());
                }
            }
            if (f["max_iterations"]) cfg.fit.max_iterations = scalar<int>(f["max_iterations"], "fit.max_iterations");
            if (f["gradient_tolerance"]) cfg.fit.gradient_tolerance = scalar<double>(f["gradient_tolerance"], "fit.gradient_tolerance");
            if (f["function_tolerance"]) cfg.fit.function_tolerance = scalar<double>(f["function_tolerance"], "fit.function_tolerance");
            if (f["max_evaluations"]) cfg.fit.max_evaluations = scalar<int>(f["max_evaluations"], "fit.max_evaluations");
            if (f["simplex_tolerance"]) cfg.fit.simplex_tolerance = scalar<double>(f["simplex_tolerance"], "fit.simplex_tolerance");
            try {
                cfg.fit.validate();
            } catch (const InputError& e) {
                fail(f, e.what());
            }
        }

        if (const auto h = root["horizon"]) {
            cfg.horizon = scalar<double>(h, "horizon");
            if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) fail(h, "horizon must be positive");
        }

        if (const auto pr = root["predict"]) {
            check_keys(pr, {"covariates"}, "predict");
            if (pr["covariates"]) cfg.predict_covariates = covariate_map(pr["covariates"], "predict.covariates", cfg.model);
        }

        if (const auto sc = root["scenario"]) {
            check_keys(sc, {"base", "offsets"}, "scenario");
            if (sc["base"]) cfg.scenario_base = covariate_map(sc["base"], "scenario.base", cfg.model);
            if (sc["offsets"]) cfg.scenario_offsets = covariate_map(sc["offsets"], "scenario.offsets", cfg.model);
        }

        if (const auto sim = root["simulate"]) {
            check_keys(sim, {"subjects", "days", "groups", "initial_state", "parameters"}, "simulate");
            auto& s = cfg.simulate;
            if (sim["subjects"]) s.subjects = scalar<int>(sim["subjects"], "simulate.subjects");
            if (sim["days"]) s.days = scalar<int>(sim["days"], "simulate.days");
            if (sim["groups"]) s.groups = scalar<int>(sim["groups"], "simulate.groups");
            if (s.subjects < 1) fail(sim, "simulate.subjects must be >= 1");
            if (s.days < 1) fail(sim, "simulate.days must be >= 1");
            if (s.groups < 1) fail(sim, "simulate.groups must be >= 1");
            if (sim["initial_state"]) {
                s.initial_state = scalar<int>(sim["initial_state"], "simulate.initial_state");
                if (!cfg.model.states().contains(*s.initial_state)) {
                    fail(sim["initial_state"], "simulate.initial_state is not a model state");
                }
            }
            if (const auto params = sim["parameters"]) {
                expect_map(params, "simulate.parameters");
                for (const auto& kv : params) {
                    const auto key = kv.first.as<std::string>();
                    Transition t;
                    try {
                        t = Transition::parse(key);
                    } catch (const InputError& e) {
                        fail(kv.first, e.what());
                    }
                    if (!cfg.model.transitions().allows(t.from, t.to)) {
                        fail(kv.first, "transition " + t.name() + " is not allowed by the model");
                    }
                    expect_map(kv.second, "simulate.parameters." + key);
                    TransitionEffects effects;
                    bool have_rate = false;
                    for (const auto& e : kv.second) {
                        const auto name = e.first.as<std::string>();
                        if (name == "rate") {
                            effects.rate = scalar<double>(e.second, "rate");
                            if (!(effects.rate > 0.0)) fail(e.second, "rate must be positive");
                            have_rate = true;
                        } else if (cfg.model.covariate_index(name)) {
                            effects.betas[name] = scalar<double>(e.second, name);
                        } else {
                            fail(e.first, "unknown covariate '" + name + "' in simulate.parameters." + key);
                        }
                    }
                    if (!have_rate) fail(kv.second, "missing required key 'rate' for " + key);
                    s.parameters[t.name()] = std::move(effects);
                }
            }
        }

        if (const auto out = root["output"]) cfg.output_dir = scalar<std::string>(out, "output");
        if (const auto seed = root["seed"]) {
            cfg.seed = scalar<std::uint64_t>(seed, "seed");
            cfg.seed_defaulted = false;
        }
    } catch (const YAML::Exception& e) {
        throw InputError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    auto dir = std::filesystem::path(path).parent_path();
    try {
        return parse_config(buf.str(), dir.empty() ? "." : dir.string());
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace yieldmsm
