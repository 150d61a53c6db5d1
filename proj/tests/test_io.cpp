#include <doctest.h>

#include <bit>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "yieldmsm/commands.hpp"
#include "yieldmsm/config.hpp"
#include "yieldmsm/csv.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/panel.hpp"
#include "yieldmsm/report.hpp"
#include "yieldmsm/simulate.hpp"

using namespace yieldmsm;
namespace fs = std::filesystem;

namespace {

const char* kModel =
    "model:\n"
    "  states: [low, medium, high]\n"
    "  transitions: [\"1->2\", \"2->1\", \"2->3\", \"3->2\"]\n"
    "  covariates: [CO2, RH, PAR]\n";

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("yieldmsm_tests_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream(path, std::ios::binary) << text;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int run(const std::string& command, const fs::path& config, cli::Overrides overrides = {}) {
    std::ostringstream out, err;
    const int code = cli::run_command(command, config.string(), overrides, out, err);
    if (code != 0) MESSAGE(err.str());
    return code;
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("CSV splitting and formatting") {
    CHECK(csv::split_line("a,\"b,c\",\"d\"\"e\",") == std::vector<std::string>{"a", "b,c", "d\"e", ""});
    CHECK(csv::format_6g(0.123456789) == "0.123457");
    CHECK(csv::format_6g(123456789.0) == "1.23457e+08");
    CHECK(csv::format_6g(std::optional<double>{}) == "");
    CHECK(csv::escape("a,b") == "\"a,b\"");
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double v = n(rng);
        CHECK(std::stod(csv::format_exact(v)) == v);
    }
}

TEST_CASE("panel CSV round trip is bit exact") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto theta = ParameterSet::from_rates(spec, {0.1, 0.1, 0.1, 0.1});
    std::vector<double> times;
    for (int d = 0; d < 20; ++d) times.push_back(d * 0.37);
    const auto panel = sample_panel(theta, spec, random_trajectories(spec, 5, 20, 2, 3), times, 3);
    std::stringstream buf;
    write_panel_csv(buf, panel);
    const auto back = read_panel_csv(buf);
    REQUIRE(back.subjects().size() == panel.subjects().size());
    for (std::size_t s = 0; s < panel.subjects().size(); ++s) {
        const auto& a = panel.subjects()[s].observations;
        const auto& b = back.subjects()[s].observations;
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::bit_cast<std::uint64_t>(a[i].time) == std::bit_cast<std::uint64_t>(b[i].time));
            CHECK(a[i].state == b[i].state);
            for (std::size_t j = 0; j < 2; ++j) {
                CHECK(std::bit_cast<std::uint64_t>(a[i].covariates[j]) == std::bit_cast<std::uint64_t>(b[i].covariates[j]));
            }
        }
    }
    std::stringstream again;
    write_panel_csv(again, back);
    std::stringstream first;
    write_panel_csv(first, panel);
    CHECK(again.str() == first.str());
}

TEST_CASE("panel CSV validation") {
    std::istringstream unsorted("subject_id,time,state\nA,2,1\nB,0,2\nA,0,1\n");
    const auto p = read_panel_csv(unsorted);
    CHECK(p.subjects()[0].id == "A");
    CHECK(p.subjects()[0].observations[0].time == 0.0);

    std::istringstream dup("subject_id,time,state\nA,1,1\nA,1,2\n");
    CHECK_THROWS_AS(read_panel_csv(dup), InputError);
    std::istringstream header("id,time,state\nA,1,1\n");
    CHECK_THROWS_AS(read_panel_csv(header), InputError);
    std::istringstream bad_state("subject_id,time,state\nA,1,x\n");
    try {
        read_panel_csv(bad_state);
        FAIL("expected rejection");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("config parsing") {
    const auto cfg = parse_config(kModel);
    CHECK(cfg.model.n_parameters() == 16);
    CHECK(cfg.seed == 0);
    CHECK(cfg.seed_defaulted);
    CHECK(cfg.horizon == 30.0);
    CHECK(cfg.algorithm == AlgorithmChoice::bfgs);

    const auto self = error_of(
        "model:\n  states: [a, b, c]\n  transitions: [\"1->2\", \"1->1\"]\n");
    CHECK(self.find("line 3") != std::string::npos);
    CHECK(self.find("1->1") != std::string::npos);

    const auto unknown = error_of(std::string(kModel) + "colour: blue\n");
    CHECK(unknown.find("line 5") != std::string::npos);
    CHECK(unknown.find("colour") != std::string::npos);

    const auto missing = error_of("seed: 3\n");
    CHECK(missing.find("model") != std::string::npos);

    const auto bad_cov = error_of(std::string(kModel) + "scenario:\n  offsets: {Wind: 1}\n");
    CHECK(bad_cov.find("line 6") != std::string::npos);
    CHECK(bad_cov.find("Wind") != std::string::npos);

    const auto bad_horizon = error_of(std::string(kModel) + "horizon: -3\n");
    CHECK(bad_horizon.find("line 5") != std::string::npos);

    const auto full = parse_config(std::string(kModel) +
                                   "fit:\n  algorithm: both\n  max_iterations: 50\n"
                                   "scenario:\n  base: {RH: 0.5}\n  offsets: {RH: 1}\n"
                                   "seed: 12\n");
    CHECK(full.algorithm == AlgorithmChoice::both);
    CHECK(full.fit.max_iterations == 50);
    CHECK(full.scenario_offsets.at("RH") == 1.0);
    CHECK(full.seed == 12);
    CHECK_FALSE(full.seed_defaulted);
}

TEST_CASE("model spec text round trip") {
    const auto spec = ModelSpec::three_state_constrained({"CO2", "RH"});
    CHECK(parse_model_spec(format_model_spec(spec)) == spec);
}

TEST_CASE("fit report JSON round trip") {
    const auto spec = ModelSpec::three_state_constrained({"RH"});
    FitResult f{.algorithm = Algorithm::nelder_mead,
                .theta_hat = ParameterSet::from_rates(spec, {0.1, 0.2, 0.3, 0.4}, {{0.1}, {-0.2}, {0.3}, {0.4}})};
    f.log_likelihood = -123.456789012345;
    f.n_parameters = 8;
    f.aic = akaike(8, f.log_likelihood);
    f.covariance = Matrix::Identity(8, 8) * 0.0123;
    f.hessian_eigenvalues = {81.3, 81.3};
    f.condition_number = 1.0;
    f.converged = true;
    f.iterations = 40;
    f.evaluations = 700;
    f.boundary_flags = {false, true, false, false};
    f.message = "ok";
    const auto j = fit_result_to_json(f, spec);
    CHECK(j["estimates"][0]["name"] == "q⁰(1->2)");
    CHECK(j["estimates"][1]["hr"].get<double>() == std::exp(0.1));
    const auto back = fit_result_from_json(nlohmann::json::parse(j.dump()), spec);
    CHECK(back.theta_hat == f.theta_hat);
    CHECK(back.log_likelihood == f.log_likelihood);
    CHECK(back.aic == f.aic);
    CHECK(*back.covariance == *f.covariance);
    CHECK(back.boundary_flags == f.boundary_flags);
    CHECK(back.algorithm == Algorithm::nelder_mead);
    CHECK_THROWS_AS(fit_result_from_json(j, ModelSpec::three_state_constrained({"PAR"})), InputError);
}

TEST_CASE("command line: simulate, fit, report, predict, scenario") {
    const auto dir = scratch_dir("cli");
    write_file(dir / "run.yaml",
               "model:\n"
               "  states: [low, medium, high]\n"
               "  transitions: [\"1->2\", \"2->1\", \"2->3\", \"3->2\"]\n"
               "  covariates: [RH, PAR]\n"
               "data:\n  panel: out/panel.csv\n  fit: out/fit.json\n"
               "fit:\n  algorithm: both\n"
               "predict:\n  covariates: {RH: 1}\n"
               "scenario:\n  offsets: {PAR: 1}\n"
               "simulate:\n  subjects: 24\n  days: 62\n  groups: 4\n"
               "  parameters:\n"
               "    \"1->2\": {rate: 0.06, RH: 0.5}\n"
               "    \"2->1\": {rate: 0.05}\n"
               "    \"2->3\": {rate: 0.06, PAR: 0.4}\n"
               "    \"3->2\": {rate: 0.04}\n"
               "seed: 5\n"
               "output: out\n");
    REQUIRE(run("simulate", dir / "run.yaml") == 0);
    const auto panel = read_panel_csv_file((dir / "out/panel.csv").string());
    CHECK(panel.n_observations() == 24 * 62);

    REQUIRE(run("fit", dir / "run.yaml") == 0);
    for (const char* name : {"fit.json", "fit_nelder-mead.json", "comparison.csv", "hazard_ratios.csv",
                             "intensity.csv", "sojourn.csv", "summary.txt", "fit.manifest.json"}) {
        CHECK_MESSAGE(fs::exists(dir / "out" / name), name);
    }
    const auto comparison = read_file(dir / "out/comparison.csv");
    CHECK(comparison.starts_with("model,algorithm,logLik,AIC\n"));
    CHECK(read_file(dir / "out/hazard_ratios.csv").starts_with("transition,covariate,hr,lo,hi,unstable\n"));

    REQUIRE(run("report", dir / "run.yaml") == 0);
    REQUIRE(run("predict", dir / "run.yaml", {.horizon = 10.0}) == 0);
    CHECK(read_file(dir / "out/prediction.csv").starts_with("from,low,medium,high\n"));
    REQUIRE(run("scenario", dir / "run.yaml") == 0);
    CHECK(read_file(dir / "out/scenario.csv").find("sojourn,low") != std::string::npos);

    const auto manifest = nlohmann::json::parse(read_file(dir / "out/predict.manifest.json"));
    CHECK(manifest["seed"] == 5);
    CHECK(manifest["overrides"]["horizon"] == 10.0);
    CHECK(manifest["inputs"][0]["path"] == "out/fit.json");
    CHECK(manifest["outputs"]["prediction.csv"] == cli::sha256_hex(read_file(dir / "out/prediction.csv")));
}

TEST_CASE("command line: preprocess then fit") {
    const auto dir = scratch_dir("preprocess");
    const auto study = test::synthetic_study(11, 30, 3);
    write_file(dir / "sensor.csv", test::sensor_csv(study));
    write_file(dir / "harvest.csv", test::harvest_csv(study));
    write_file(dir / "pre.yaml", std::string(kModel) + "data:\n  sensor: sensor.csv\n  harvest: harvest.csv\n"
                                                       "preprocess:\n  fixed_effects: false\n");
    REQUIRE(run("preprocess", dir / "pre.yaml") == 0);
    const auto panel = read_panel_csv_file((dir / "out/panel.csv").string());
    CHECK(panel.subjects().size() == 12);
    CHECK(panel.covariate_names() == std::vector<std::string>{"CO2", "RH", "PAR"});
    CHECK(fs::exists(dir / "out/daily.csv"));
    CHECK(fs::exists(dir / "out/correlations.csv"));

    write_file(dir / "fit.yaml", std::string(kModel) + "data:\n  panel: out/panel.csv\n");
    CHECK(run("fit", dir / "fit.yaml") == 0);
    const auto j = nlohmann::json::parse(read_file(dir / "out/fit.json"));
    CHECK(j["n_parameters"] == 16);
}

TEST_CASE("command line: exit codes") {
    const auto dir = scratch_dir("codes");
    write_file(dir / "missing.yaml", std::string(kModel) + "data:\n  panel: nowhere.csv\n");
    CHECK(run("fit", dir / "missing.yaml") == cli::kExitInput);
    CHECK(run("fit", dir / "absent.yaml") == cli::kExitInput);
    write_file(dir / "bad.yaml", "model: [\n");
    CHECK(run("fit", dir / "bad.yaml") == cli::kExitInput);

    // An observed move that the structure cannot produce in any time.
    write_file(dir / "panel.csv", "subject_id,time,state\nA,0,3\nA,1,1\n");
    write_file(dir / "chain.yaml",
               "model:\n  states: [a, b, c]\n  transitions: [\"1->2\", \"2->3\"]\n"
               "data:\n  panel: panel.csv\n");
    CHECK(run("fit", dir / "chain.yaml") == cli::kExitNumerical);

    const auto cli = std::string(YIELDMSM_CLI_PATH);
    CHECK(WEXITSTATUS(std::system((cli + " fit --config " + (dir / "chain.yaml").string() + " 2>/dev/null").c_str())) == 3);
    CHECK(WEXITSTATUS(std::system((cli + " fit 2>/dev/null").c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((cli + " fit --config x --algorithm newton 2>/dev/null").c_str())) == 2);
    CHECK(WEXITSTATUS(std::system((cli + " --help >/dev/null").c_str())) == 0);
}
