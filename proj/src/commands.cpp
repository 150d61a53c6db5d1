#include "yieldmsm/commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "yieldmsm/config.hpp"
#include "yieldmsm/csv.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/inference.hpp"
#include "yieldmsm/panel.hpp"
#include "yieldmsm/pipeline.hpp"
#include "yieldmsm/report.hpp"
#include "yieldmsm/simulate.hpp"

namespace yieldmsm::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Input {
    std::string label;  // path as written in the config
    std::string bytes;
};

struct Run {
    RunConfig cfg;
    Overrides overrides;
    std::vector<Input> inputs;
    std::map<std::string, std::string> outputs;  // file name -> contents
    std::ostream* out = nullptr;

    std::string read(const std::optional<std::string>& path, const std::string& key) {
        if (!path) throw InputError("config lacks data." + key + ", which this command needs");
        const auto resolved = cfg.resolve(*path);
        if (!fs::is_regular_file(resolved)) {
            throw InputError("data." + key + " file '" + *path + "' does not exist");
        }
        std::ifstream in(resolved, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        inputs.push_back(Input{*path, buf.str()});
        return inputs.back().bytes;
    }

    void emit(const std::string& name, const std::function<void(std::ostream&)>& writer) {
        std::ostringstream buf;
        writer(buf);
        outputs[name] = buf.str();
    }
};

std::vector<AlgorithmChoice> algorithms_of(AlgorithmChoice choice) {
    if (choice == AlgorithmChoice::both) return {AlgorithmChoice::bfgs, AlgorithmChoice::nelder_mead};
    return {choice};
}

Algorithm to_algorithm(AlgorithmChoice choice) {
    return choice == AlgorithmChoice::nelder_mead ? Algorithm::nelder_mead : Algorithm::bfgs;
}

std::string model_label(const ModelSpec& spec) {
    std::string label = std::to_string(spec.n_transitions()) + " transitions";
    if (spec.n_covariates() == 0) return label;
    label += ", covariates ";
    for (std::size_t i = 0; i < spec.n_covariates(); ++i) {
        if (i) label += '+';
        label += spec.covariate_names()[i];
    }
    return label;
}

PanelDataset panel_from_pipeline(Run& run, std::vector<std::string>* warnings = nullptr,
                                 pipeline::PipelineOutput* full = nullptr) {
    std::istringstream sensor_in(run.read(run.cfg.sensor_csv, "sensor"));
    std::istringstream harvest_in(run.read(run.cfg.harvest_csv, "harvest"));
    auto result = pipeline::run_pipeline(pipeline::read_sensor_csv(sensor_in),
                                         pipeline::read_harvest_csv(harvest_in), run.cfg.preprocess);
    if (warnings) *warnings = result.warnings;
    auto panel = pipeline::round_significant(result.panel, 6);
    if (full) *full = std::move(result);
    return panel;
}

PanelDataset load_panel(Run& run) {
    if (run.cfg.panel_csv) {
        std::istringstream in(run.read(run.cfg.panel_csv, "panel"));
        return read_panel_csv(in);
    }
    if (run.cfg.sensor_csv || run.cfg.harvest_csv) return panel_from_pipeline(run);
    throw InputError("config needs data.panel, or data.sensor and data.harvest");
}

FitResult load_fit(Run& run) {
    const auto bytes = run.read(run.cfg.fit_json, "fit");
    json j;
    try {
        j = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw InputError("data.fit: " + std::string(e.what()));
    }
    return fit_result_from_json(j, run.cfg.model);
}

void emit_fit_tables(Run& run, const FitResult& fit) {
    const auto& spec = run.cfg.model;
    const auto q = assemble_generator(fit.theta_hat, CovariateVector::zeros(spec), spec);
    run.emit("intensity.csv", [&](std::ostream& o) { write_matrix_csv(o, q.matrix(), spec.states()); });
    run.emit("hazard_ratios.csv",
             [&](std::ostream& o) { write_hazard_ratio_csv(o, hazard_ratios(fit, spec)); });
    run.emit("sojourn.csv",
             [&](std::ostream& o) { write_sojourn_csv(o, sojourn_summary(fit, spec), spec.states()); });
    const auto summary = fit_summary_text(fit, spec);
    run.emit("summary.txt", [&](std::ostream& o) { o << summary; });
    *run.out << summary;
}

void cmd_preprocess(Run& run) {
    std::vector<std::string> warnings;
    pipeline::PipelineOutput full;
    const auto panel = panel_from_pipeline(run, &warnings, &full);
    run.emit("panel.csv", [&](std::ostream& o) { write_panel_csv(o, panel); });
    run.emit("daily.csv", [&](std::ostream& o) { pipeline::write_daily_table(o, full.table); });
    run.emit("correlations.csv", [&](std::ostream& o) {
        o << "variable";
        for (const auto& v : full.screening_variables) o << ',' << v;
        o << '\n';
        for (std::size_t r = 0; r < full.screening_variables.size(); ++r) {
            o << full.screening_variables[r];
            for (std::size_t c = 0; c < full.screening_variables.size(); ++c) {
                o << ',' << csv::format_6g(full.correlations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            }
            o << '\n';
        }
    });
    std::ostringstream summary;
    summary << "Cut-points: " << csv::format_6g(full.cuts.low) << ", " << csv::format_6g(full.cuts.high) << '\n';
    summary << "Subjects: " << panel.subjects().size() << ", observations " << panel.n_observations() << '\n';
    for (const auto& w : warnings) summary << "warning: " << w << '\n';
    run.emit("preprocess_summary.txt", [&](std::ostream& o) { o << summary.str(); });
    *run.out << summary.str();
}

void cmd_fit(Run& run) {
    const auto& spec = run.cfg.model;
    const auto panel = load_panel(run).select_covariates(spec);
    panel.check_states(spec);
    std::vector<std::string> warnings;
    const auto theta0 = crude_initializer(panel, spec, &warnings);
    for (const auto& w : warnings) *run.out << "warning: " << w << '\n';

    std::vector<std::pair<std::string, FitResult>> fits;
    for (auto choice : algorithms_of(run.cfg.algorithm)) {
        auto opts = run.cfg.fit;
        opts.algorithm = to_algorithm(choice);
        fits.emplace_back(model_label(spec), fit(panel, spec, theta0, opts));
    }
    const auto& primary = fits.front().second;
    for (const auto& [label, f] : fits) {
        const auto name = fits.size() == 1 || &f == &primary
                              ? std::string("fit.json")
                              : "fit_" + std::string(to_string(f.algorithm)) + ".json";
        const auto text = fit_result_to_json(f, spec).dump(2) + "\n";
        run.emit(name, [&](std::ostream& o) { o << text; });
    }
    emit_fit_tables(run, primary);
    if (fits.size() > 1) {
        run.emit("comparison.csv", [&](std::ostream& o) { write_comparison_csv(o, fits); });
        *run.out << '\n' << run.outputs["comparison.csv"];
    }
}

void cmd_report(Run& run) { emit_fit_tables(run, load_fit(run)); }

void cmd_predict(Run& run) {
    const auto f = load_fit(run);
    const auto z = run.cfg.covariates_from(run.cfg.predict_covariates);
    const auto forecast = predict_matrix(f, run.cfg.model, z, run.cfg.horizon);
    run.emit("prediction.csv", [&](std::ostream& o) {
        write_matrix_csv(o, forecast.probabilities.matrix(), run.cfg.model.states());
    });
    *run.out << "P(" << csv::format_6g(run.cfg.horizon) << " days)\n" << run.outputs["prediction.csv"];
}

void cmd_scenario(Run& run) {
    if (run.cfg.scenario_offsets.empty()) throw InputError("config lacks scenario.offsets");
    const auto f = load_fit(run);
    const auto base = run.cfg.covariates_from(run.cfg.scenario_base);
    auto alt = base;
    for (const auto& [name, delta] : run.cfg.scenario_offsets) alt = alt.with(name, delta, true);
    const auto cmp = scenario_compare(f, run.cfg.model, base, alt, run.cfg.horizon);
    run.emit("scenario.csv", [&](std::ostream& o) { write_scenario_csv(o, cmp, run.cfg.model.states()); });
    *run.out << run.outputs["scenario.csv"];
}

void cmd_simulate(Run& run) {
    const auto& spec = run.cfg.model;
    const auto& sim = run.cfg.simulate;
    const auto theta = run.cfg.simulation_parameters();
    const auto trajectories = random_trajectories(spec, sim.subjects, sim.days, sim.groups, run.cfg.seed);
    std::vector<double> times(static_cast<std::size_t>(sim.days));
    for (std::size_t d = 0; d < times.size(); ++d) times[d] = static_cast<double>(d);
    std::vector<int> initial;
    if (sim.initial_state) initial.assign(trajectories.size(), *sim.initial_state);
    const auto panel = sample_panel(theta, spec, trajectories, times, run.cfg.seed, initial);
    run.emit("panel.csv", [&](std::ostream& o) { write_panel_csv(o, panel); });
    *run.out << "Simulated " << panel.subjects().size() << " subjects, " << panel.n_observations()
             << " observations (seed " << run.cfg.seed << ")\n";
}

json manifest(const std::string& command, const Run& run) {
    json overrides = json::object();
    if (run.overrides.algorithm) overrides["algorithm"] = *run.overrides.algorithm;
    if (run.overrides.horizon) overrides["horizon"] = *run.overrides.horizon;
    if (run.overrides.seed) overrides["seed"] = *run.overrides.seed;
    json inputs = json::array();
    for (const auto& in : run.inputs) inputs.push_back({{"path", in.label}, {"sha256", sha256_hex(in.bytes)}});
    json outputs = json::object();
    for (const auto& [name, bytes] : run.outputs) outputs[name] = sha256_hex(bytes);
    return json{
        {"tool", "yieldmsm"},
        {"version", kToolVersion},
        {"command", command},
        {"config", run.cfg.text},
        {"config_sha256", sha256_hex(run.cfg.text)},
        {"overrides", overrides},
        {"seed", run.cfg.seed},
        {"seed_defaulted", run.cfg.seed_defaulted},
        {"algorithm", std::string(to_string(run.cfg.algorithm))},
        {"horizon", run.cfg.horizon},
        {"inputs", inputs},
        {"outputs", outputs},
    };
}

const std::map<std::string, void (*)(Run&)>& handlers() {
    static const std::map<std::string, void (*)(Run&)> table{
        {"preprocess", cmd_preprocess}, {"fit", cmd_fit},           {"report", cmd_report},
        {"predict", cmd_predict},       {"simulate", cmd_simulate}, {"scenario", cmd_scenario},
    };
    return table;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"preprocess", "fit", "report", "predict", "simulate", "scenario"};
    return names;
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::ostringstream hex;
    for (unsigned int i = 0; i < length; ++i) {
        hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    }
    return hex.str();
}

int run_command(const std::string& command, const std::string& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err) {
    try {
        const auto handler = handlers().find(command);
        if (handler == handlers().end()) throw InputError("unknown command '" + command + "'");

        Run run{load_config(config_path), overrides, {}, {}, &out};
        if (overrides.algorithm) run.cfg.algorithm = parse_algorithm_choice(*overrides.algorithm);
        if (overrides.horizon) {
            if (!(*overrides.horizon > 0.0) || !std::isfinite(*overrides.horizon)) {
                throw InputError("--horizon must be positive");
            }
            run.cfg.horizon = *overrides.horizon;
        }
        if (overrides.seed) {
            run.cfg.seed = *overrides.seed;
            run.cfg.seed_defaulted = false;
        }
        const fs::path out_dir = overrides.out ? fs::path(*overrides.out) : fs::path(run.cfg.resolve(run.cfg.output_dir));

        handler->second(run);

        const auto manifest_text = manifest(command, run).dump(2) + "\n";
        fs::create_directories(out_dir);
        run.outputs[command + ".manifest.json"] = manifest_text;
        for (const auto& [name, bytes] : run.outputs) {
            std::ofstream file(out_dir / name, std::ios::binary);
            if (!(file << bytes)) throw std::runtime_error("cannot write " + (out_dir / name).string());
        }
        return kExitOk;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitOther;
    }
}

}  // namespace yieldmsm::cli
