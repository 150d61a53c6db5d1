#include <optional>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "yieldmsm/commands.hpp"
#include "yieldmsm/config.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/inference.hpp"
#include "yieldmsm/likelihood.hpp"
#include "yieldmsm/matexp.hpp"
#include "yieldmsm/optim.hpp"
#include "yieldmsm/panel.hpp"
#include "yieldmsm/report.hpp"
#include "yieldmsm/simulate.hpp"

namespace py = pybind11;
using namespace yieldmsm;

namespace {

Algorithm algorithm_from(const std::string& name) {
    if (name == "bfgs") return Algorithm::bfgs;
    if (name == "nelder-mead" || name == "nelder_mead") return Algorithm::nelder_mead;
    throw InputError("unknown algorithm '" + name + "' (expected bfgs or nelder-mead)");
}

CovariateVector covariates_for(const ModelSpec& spec, const std::vector<double>& z) {
    if (z.empty()) return CovariateVector::zeros(spec);
    return CovariateVector(spec.covariate_names(), z);
}

PanelDataset panel_from_csv(const std::string& text) {
    std::istringstream in(text);
    return read_panel_csv(in);
}

std::string panel_to_csv(const PanelDataset& data) {
    std::ostringstream out;
    write_panel_csv(out, data);
    return out.str();
}

}  // namespace

PYBIND11_MODULE(_yieldmsm, m) {
    m.doc() = "Continuous-time Markov multi-state models for daily yield states";
    m.attr("__version__") = cli::kToolVersion;

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<ModelSpec>(m, "ModelSpec")
        .def_static("three_state", &ModelSpec::three_state_constrained, py::arg("covariates") = std::vector<std::string>{},
                    "Three yield states with 1<->3 disallowed.")
        .def_static("from_yaml", [](const std::string& text) { return parse_model_spec(text); })
        .def("to_yaml", [](const ModelSpec& s) { return format_model_spec(s); })
        .def_property_readonly("n_states", &ModelSpec::n_states)
        .def_property_readonly("n_parameters", &ModelSpec::n_parameters)
        .def_property_readonly("covariates", &ModelSpec::covariate_names)
        .def_property_readonly("parameter_names", &ModelSpec::parameter_names)
        .def_property_readonly("state_labels", [](const ModelSpec& s) { return s.states().labels(); })
        .def_property_readonly("transitions",
                               [](const ModelSpec& s) {
                                   std::vector<std::string> names;
                                   for (const auto& t : s.transitions().allowed()) names.push_back(t.name());
                                   return names;
                               })
        .def("__eq__", [](const ModelSpec& a, const ModelSpec& b) { return a == b; });

    py::class_<ParameterSet>(m, "ParameterSet")
        .def(py::init([](const ModelSpec& spec, std::vector<double> values) { return ParameterSet(spec, values); }),
             py::arg("spec"), py::arg("values"))
        .def_static("from_rates", &ParameterSet::from_rates, py::arg("spec"), py::arg("baselines"),
                    py::arg("betas") = std::vector<std::vector<double>>{})
        .def_property_readonly("values",
                               [](const ParameterSet& p) { return std::vector<double>(p.values().begin(), p.values().end()); })
        .def("baseline", &ParameterSet::baseline)
        .def("beta", &ParameterSet::beta);

    py::class_<PanelDataset>(m, "PanelDataset")
        .def_static("from_csv", &panel_from_csv, "Parse subject_id,time,state[,covariates...] text.")
        .def_static("read", &read_panel_csv_file)
        .def("to_csv", &panel_to_csv)
        .def_property_readonly("covariates", &PanelDataset::covariate_names)
        .def_property_readonly("n_observations", &PanelDataset::n_observations)
        .def_property_readonly("n_intervals", &PanelDataset::n_intervals)
        .def_property_readonly("subject_ids", [](const PanelDataset& d) {
            std::vector<std::string> ids;
            for (const auto& s : d.subjects()) ids.push_back(s.id);
            return ids;
        });

    m.def(
        "generator",
        [](const ParameterSet& theta, const ModelSpec& spec, const std::vector<double>& z) {
            return assemble_generator(theta, covariates_for(spec, z), spec).matrix();
        },
        py::arg("theta"), py::arg("spec"), py::arg("z") = std::vector<double>{},
        "Intensity matrix Q(z) in day^-1.");
    m.def(
        "transition_probability_matrix",
        [](const Matrix& q, double t) { return transition_probability_matrix(GeneratorMatrix(q), t).matrix(); },
        py::arg("q"), py::arg("t"), "P(t) = exp(tQ) by scaling and squaring.");
    m.def(
        "uniformization",
        [](const Matrix& q, double t, double tol) { return uniformization_oracle(GeneratorMatrix(q), t, tol).matrix(); },
        py::arg("q"), py::arg("t"), py::arg("tol") = 1e-12);
    m.def(
        "sojourn_time", [](const Matrix& q, int state) { return sojourn_time(GeneratorMatrix(q), state); },
        py::arg("q"), py::arg("state"), "Expected stay in 1-based `state`, in days.");

    m.def(
        "simulate_panel",
        [](const ParameterSet& theta, const ModelSpec& spec, int subjects, int days, int groups, std::uint64_t seed) {
            std::vector<double> times(static_cast<std::size_t>(days));
            for (int d = 0; d < days; ++d) times[static_cast<std::size_t>(d)] = d;
            return sample_panel(theta, spec, random_trajectories(spec, subjects, days, groups, seed), times, seed);
        },
        py::arg("theta"), py::arg("spec"), py::arg("subjects") = 24, py::arg("days") = 62, py::arg("groups") = 4,
        py::arg("seed") = 0, "Daily panel under standard-normal covariates shared within groups.");

    m.def(
        "log_likelihood",
        [](const PanelDataset& data, const ParameterSet& theta, const ModelSpec& spec) {
            return total_log_likelihood(data, theta, spec);
        },
        py::arg("data"), py::arg("theta"), py::arg("spec"));

    m.def(
        "fit",
        [](const PanelDataset& data, const ModelSpec& spec, const std::string& algorithm) {
            FitOptions opts;
            opts.algorithm = algorithm_from(algorithm);
            std::optional<FitResult> result;
            {
                py::gil_scoped_release release;
                result = fit(data, spec, crude_initializer(data, spec), opts);
            }
            return fit_result_to_json(*result, spec).dump();
        },
        py::arg("data"), py::arg("spec"), py::arg("algorithm") = "bfgs",
        "Maximum-likelihood fit; returns the fit report as JSON text.");

    m.def(
        "hazard_ratio",
        [](double beta, double se) {
            const auto e = make_hazard_ratio({1, 2}, "", beta, se, false);
            return py::make_tuple(e.hr, *e.ci_low, *e.ci_high);
        },
        py::arg("beta"), py::arg("se"), "(exp(beta), 95% interval) from a log-scale estimate and its SE.");

    m.def(
        "run_command",
        [](const std::string& command, const std::string& config, std::optional<std::string> algorithm,
           std::optional<double> horizon, std::optional<std::uint64_t> seed, std::optional<std::string> out) {
            cli::Overrides overrides{algorithm, horizon, seed, out};
            std::ostringstream out_text, err_text;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = cli::run_command(command, config, overrides, out_text, err_text);
            }
            return py::make_tuple(code, out_text.str(), err_text.str());
        },
        py::arg("command"), py::arg("config"), py::arg("algorithm") = py::none(), py::arg("horizon") = py::none(),
        py::arg("seed") = py::none(), py::arg("out") = py::none(),
        "Runs a CLI subcommand in process; returns (exit_code, stdout, stderr).");
}
