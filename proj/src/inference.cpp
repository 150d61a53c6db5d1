#include "yieldmsm/inference.hpp"

#include <cmath>

#include "yieldmsm/error.hpp"

namespace yieldmsm {

HazardRatioEntry make_hazard_ratio(const Transition& transition, std::string covariate, double beta,
                                   std::optional<double> se, bool unstable) {
    HazardRatioEntry entry{transition, std::move(covariate), std::exp(beta), {}, {}, unstable};
    if (se && std::isfinite(*se)) {
        entry.ci_low = std::exp(beta - kWaldZ95 * *se);
        entry.ci_high = std::exp(beta + kWaldZ95 * *se);
    } else {
        entry.unstable = true;
    }
    return entry;
}

std::vector<HazardRatioEntry> hazard_ratios(const FitResult& fit, const ModelSpec& spec) {
    const auto& theta = fit.theta_hat;
    if (theta.n_transitions() != spec.n_transitions() || theta.n_covariates() != spec.n_covariates()) {
        throw InputError("fit result does not match the model");
    }
    const auto se = fit.standard_errors();
    const std::size_t p = spec.n_covariates();
    std::vector<HazardRatioEntry> entries;
    for (std::size_t k = 0; k < spec.n_transitions(); ++k) {
        const bool flagged = k < fit.boundary_flags.size() && fit.boundary_flags[k];
        for (std::size_t j = 0; j < p; ++j) {
            const std::size_t index = ParameterSet::log_baseline_offset(k, p) + 1 + j;
            std::optional<double> s;
            if (!se.empty()) s = se[index];
            entries.push_back(make_hazard_ratio(spec.transitions().allowed()[k],
                                                spec.covariate_names()[j], theta.beta(k, j), s,
                                                flagged || !fit.converged));
        }
    }
    return entries;
}

HorizonForecast predict_matrix(const FitResult& fit, const ModelSpec& spec, const CovariateVector& z,
                               double t) {
    const auto q = assemble_generator(fit.theta_hat, z, spec);
    return HorizonForecast{t, transition_probability_matrix(q, t), z};
}

std::vector<SojournSummary> sojourn_summary(const FitResult& fit, const ModelSpec& spec) {
    const auto q = assemble_generator(fit.theta_hat, CovariateVector::zeros(spec), spec);
    const std::size_t p = spec.n_covariates();
    std::vector<SojournSummary> out;
    for (int r = 1; r <= spec.n_states(); ++r) {
        SojournSummary s{r, sojourn_time(q, r), {}, {}};
        if (fit.covariance && std::isfinite(s.days)) {
            // log sojourn = -log Σ_k exp(a_k); gradient wrt a_k is -q_k / Σq.
            const double exit = -q(r - 1, r - 1);
            double variance = 0.0;
            const auto& allowed = spec.transitions().allowed();
            for (std::size_t a = 0; a < allowed.size(); ++a) {
                if (allowed[a].from != r) continue;
                const double ga = q(r - 1, allowed[a].to - 1) / exit;
                for (std::size_t b = 0; b < allowed.size(); ++b) {
                    if (allowed[b].from != r) continue;
                    const double gb = q(r - 1, allowed[b].to - 1) / exit;
                    variance += ga * gb *
                                (*fit.covariance)(static_cast<Eigen::Index>(ParameterSet::log_baseline_offset(a, p)),
                                                  static_cast<Eigen::Index>(ParameterSet::log_baseline_offset(b, p)));
                }
            }
            const double se = std::sqrt(std::max(variance, 0.0));
            s.ci_low = s.days * std::exp(-kWaldZ95 * se);
            s.ci_high = s.days * std::exp(kWaldZ95 * se);
        }
        out.push_back(s);
    }
    return out;
}

ScenarioComparison scenario_compare(const FitResult& fit, const ModelSpec& spec,
                                    const CovariateVector& z_base, const CovariateVector& z_alt,
                                    double t) {
    const auto q_base = assemble_generator(fit.theta_hat, z_base, spec);
    const auto q_alt = assemble_generator(fit.theta_hat, z_alt, spec);
    ScenarioComparison cmp;
    cmp.horizon = t;
    cmp.base = z_base;
    cmp.alternative = z_alt;
    cmp.base_probabilities = transition_probability_matrix(q_base, t).matrix();
    cmp.alternative_probabilities = transition_probability_matrix(q_alt, t).matrix();
    cmp.delta = cmp.alternative_probabilities - cmp.base_probabilities;
    for (int r = 1; r <= spec.n_states(); ++r) {
        const double base = sojourn_time(q_base, r);
        const double alt = sojourn_time(q_alt, r);
        cmp.sojourn_base.push_back(base);
        cmp.sojourn_alternative.push_back(alt);
        cmp.sojourn_ratio.push_back(base == alt ? 1.0 : alt / base);
    }
    return cmp;
}

}  // namespace yieldmsm
