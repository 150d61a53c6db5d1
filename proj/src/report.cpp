#include "yieldmsm/report.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "yieldmsm/csv.hpp"
#include "yieldmsm/error.hpp"

namespace yieldmsm {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) {
    return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != rows.size()) {
            throw InputError("fit report: covariance must be square");
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

// Left-aligns to a display width counted in UTF-8 code points.
std::string padded(const std::string& text, std::size_t width) {
    std::size_t shown = 0;
    for (unsigned char c : text) shown += (c & 0xC0) != 0x80;
    return text + std::string(shown < width ? width - shown : 0, ' ');
}

}  // namespace

json fit_result_to_json(const FitResult& fit, const ModelSpec& spec) {
    const auto names = spec.parameter_names();
    const auto se = fit.standard_errors();
    const auto theta = fit.theta_hat.values();

    json estimates = json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        json e{{"name", names[i]}};
        const bool is_baseline = i % (1 + spec.n_covariates()) == 0;
        if (is_baseline) {
            e["log_value"] = theta[i];
            e["value"] = std::exp(theta[i]);
        } else {
            e["value"] = theta[i];
            e["hr"] = std::exp(theta[i]);
        }
        e["se"] = se.empty() ? json(nullptr) : json(se[i]);
        estimates.push_back(std::move(e));
    }

    std::vector<std::string> transitions;
    for (const auto& t : spec.transitions().allowed()) transitions.push_back(t.name());

    json boundary = json::object();
    for (std::size_t k = 0; k < spec.n_transitions(); ++k) {
        boundary[transitions[k]] = k < fit.boundary_flags.size() && fit.boundary_flags[k];
    }

    return json{
        {"algorithm", std::string(to_string(fit.algorithm))},
        {"model",
         {{"states", spec.states().labels()},
          {"transitions", transitions},
          {"covariates", spec.covariate_names()}}},
        {"converged", fit.converged},
        {"iterations", fit.iterations},
        {"evaluations", fit.evaluations},
        {"message", fit.message},
        {"log_likelihood", fit.log_likelihood},
        {"aic", fit.aic},
        {"n_parameters", fit.n_parameters},
        {"estimates", estimates},
        {"theta", std::vector<double>(theta.begin(), theta.end())},
        {"hessian_eigenvalues", fit.hessian_eigenvalues},
        {"condition_number", optional_number(fit.condition_number)},
        {"covariance", fit.covariance ? matrix_to_json(*fit.covariance) : json(nullptr)},
        {"boundary_flags", boundary},
    };
}

ModelSpec model_from_fit_json(const json& j) {
    try {
        const auto& m = j.at("model");
        std::vector<Transition> allowed;
        for (const auto& t : m.at("transitions")) allowed.push_back(Transition::parse(t.get<std::string>()));
        auto labels = m.at("states").get<std::vector<std::string>>();
        const int k = static_cast<int>(labels.size());
        return ModelSpec(StateSpace(std::move(labels)), TransitionStructure(std::move(allowed), k),
                         m.at("covariates").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
        throw InputError(std::string("fit report: ") + e.what());
    }
}

FitResult fit_result_from_json(const json& j, const ModelSpec& spec) {
    if (!(model_from_fit_json(j) == spec)) {
        throw InputError("fit report was produced for a different model");
    }
    try {
        FitResult fit{
            .algorithm = parse_algorithm(j.at("algorithm").get<std::string>()),
            .theta_hat = ParameterSet(spec, j.at("theta").get<std::vector<double>>()),
        };
        fit.log_likelihood = j.at("log_likelihood").get<double>();
        fit.n_parameters = j.at("n_parameters").get<int>();
        fit.aic = akaike(fit.n_parameters, fit.log_likelihood);
        fit.converged = j.at("converged").get<bool>();
        fit.iterations = j.at("iterations").get<int>();
        fit.evaluations = j.at("evaluations").get<int>();
        fit.message = j.at("message").get<std::string>();
        fit.hessian_eigenvalues = j.at("hessian_eigenvalues").get<std::vector<double>>();
        if (!j.at("condition_number").is_null()) fit.condition_number = j.at("condition_number").get<double>();
        if (!j.at("covariance").is_null()) {
            fit.covariance = matrix_from_json(j.at("covariance"));
            if (fit.covariance->rows() != static_cast<Eigen::Index>(spec.n_parameters())) {
                throw InputError("fit report: covariance dimension does not match the model");
            }
        }
        for (const auto& t : spec.transitions().allowed()) {
            fit.boundary_flags.push_back(j.at("boundary_flags").at(t.name()).get<bool>());
        }
        return fit;
    } catch (const json::exception& e) {
        throw InputError(std::string("fit report: ") + e.what());
    }
}

void write_matrix_csv(std::ostream& out, const Matrix& m, const StateSpace& states) {
    out << "from";
    for (const auto& label : states.labels()) out << ',' << csv::escape(label);
    out << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        out << csv::escape(states.labels()[static_cast<std::size_t>(r)]);
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << csv::format_6g(m(r, c));
        out << '\n';
    }
}

void write_hazard_ratio_csv(std::ostream& out, const std::vector<HazardRatioEntry>& entries) {
    out << "transition,covariate,hr,lo,hi,unstable\n";
    for (const auto& e : entries) {
        out << e.transition.name() << ',' << csv::escape(e.covariate) << ',' << csv::format_6g(e.hr)
            << ',' << csv::format_6g(e.ci_low) << ',' << csv::format_6g(e.ci_high) << ','
            << (e.unstable ? "true" : "false") << '\n';
    }
}

void write_sojourn_csv(std::ostream& out, const std::vector<SojournSummary>& sojourns,
                       const StateSpace& states) {
    out << "state,label,sojourn_days,lo,hi\n";
    for (const auto& s : sojourns) {
        out << s.state << ',' << csv::escape(states.label(s.state)) << ','
            << (std::isinf(s.days) ? std::string("inf") : csv::format_6g(s.days)) << ','
            << csv::format_6g(s.ci_low) << ',' << csv::format_6g(s.ci_high) << '\n';
    }
}

void write_comparison_csv(std::ostream& out, const std::vector<std::pair<std::string, FitResult>>& fits) {
    out << "model,algorithm,logLik,AIC\n";
    for (const auto& [label, fit] : fits) {
        out << csv::escape(label) << ',' << to_string(fit.algorithm) << ','
            << csv::format_6g(fit.log_likelihood) << ',' << csv::format_6g(fit.aic) << '\n';
    }
}

void write_scenario_csv(std::ostream& out, const ScenarioComparison& cmp, const StateSpace& states) {
    out << "quantity,from,to,base,alternative,delta_or_ratio\n";
    const auto k = cmp.delta.rows();
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index s = 0; s < k; ++s) {
            out << "P(t)," << csv::escape(states.labels()[static_cast<std::size_t>(r)]) << ','
                << csv::escape(states.labels()[static_cast<std::size_t>(s)]) << ','
                << csv::format_6g(cmp.base_probabilities(r, s)) << ','
                << csv::format_6g(cmp.alternative_probabilities(r, s)) << ','
                << csv::format_6g(cmp.delta(r, s)) << '\n';
        }
    }
    auto fmt = [](double v) { return std::isinf(v) ? std::string("inf") : csv::format_6g(v); };
    for (std::size_t r = 0; r < cmp.sojourn_base.size(); ++r) {
        out << "sojourn," << csv::escape(states.labels()[r]) << ",," << fmt(cmp.sojourn_base[r]) << ','
            << fmt(cmp.sojourn_alternative[r]) << ',' << csv::format_6g(cmp.sojourn_ratio[r]) << '\n';
    }
}

std::string fit_summary_text(const FitResult& fit, const ModelSpec& spec) {
    std::ostringstream out;
    out << "Algorithm:        " << to_string(fit.algorithm) << '\n';
    out << "Converged:        " << (fit.converged ? "yes" : "no") << " (" << fit.message << ")\n";
    out << "Iterations:       " << fit.iterations << ", objective evaluations " << fit.evaluations << '\n';
    out << "Log-likelihood:   " << csv::format_6g(fit.log_likelihood) << '\n';
    out << "AIC:              " << csv::format_6g(fit.aic) << " (k = " << fit.n_parameters << ")\n";
    if (!fit.hessian_eigenvalues.empty()) {
        out << "Hessian:          lambda_min " << csv::format_6g(fit.hessian_eigenvalues.front())
            << ", lambda_max " << csv::format_6g(fit.hessian_eigenvalues.back());
        if (fit.condition_number) out << ", condition number " << csv::format_6g(*fit.condition_number);
        out << '\n';
    }
    if (!fit.identified()) out << "WARNING: observed information is not positive definite\n";
    out << '\n';
    const auto names = spec.parameter_names();
    const auto se = fit.standard_errors();
    out << std::left << std::setw(32) << "parameter" << std::setw(14) << "estimate" << "se\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        const double v = fit.theta_hat.values()[i];
        const bool baseline = i % (1 + spec.n_covariates()) == 0;
        out << padded(names[i], 32) << std::setw(14) << csv::format_6g(baseline ? std::exp(v) : v)
            << (se.empty() ? std::string("-") : csv::format_6g(se[i])) << '\n';
    }
    out << "(q⁰ estimates in day⁻¹; their se is on the log scale)\n";
    for (std::size_t k = 0; k < fit.boundary_flags.size(); ++k) {
        if (fit.boundary_flags[k]) {
            out << "note: " << spec.transitions().allowed()[k].name()
                << " sits near the parameter boundary; interpret with caution\n";
        }
    }
    return out.str();
}

}  // namespace yieldmsm
