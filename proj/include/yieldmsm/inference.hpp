#pragma once

#include <optional>
#include <string>
#include <vector>

#include "yieldmsm/matexp.hpp"
#include "yieldmsm/model.hpp"
#include "yieldmsm/optim.hpp"

namespace yieldmsm {

/// Normal quantile for two-sided 95% Wald intervals on the log scale.
inline constexpr double kWaldZ95 = 1.96;

struct HazardRatioEntry {
    Transition transition;
    std::string covariate;
    double hr = 1.0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    bool unstable = false;
};

/// hr = exp(beta); CI = exp(beta ± 1.96·se) when se is available.
HazardRatioEntry make_hazard_ratio(const Transition& transition, std::string covariate, double beta,
                                   std::optional<double> se, bool unstable);

/// One entry per (transition, covariate), ordered by transition then
/// covariate. Entries are unstable when the fit did not converge, the
/// transition is boundary-flagged, or the covariance is absent.
std::vector<HazardRatioEntry> hazard_ratios(const FitResult& fit, const ModelSpec& spec);

struct HorizonForecast {
    double horizon = 0.0;
    ProbabilityMatrix probabilities;
    CovariateVector setting;
};

HorizonForecast predict_matrix(const FitResult& fit, const ModelSpec& spec, const CovariateVector& z,
                               double t);

struct SojournSummary {
    int state = 0;
    double days = 0.0;  // +inf for an absorbing state
    std::optional<double> ci_low;
    std::optional<double> ci_high;
};

/// Sojourn times at z = 0, with delta-method intervals propagated from the
/// log-baseline block of the covariance.
std::vector<SojournSummary> sojourn_summary(const FitResult& fit, const ModelSpec& spec);

struct ScenarioComparison {
    double horizon = 0.0;
    CovariateVector base;
    CovariateVector alternative;
    Matrix base_probabilities;
    Matrix alternative_probabilities;
    Matrix delta;  // alternative - base
    std::vector<double> sojourn_base;
    std::vector<double> sojourn_alternative;
    std::vector<double> sojourn_ratio;  // alternative / base, exactly 1 when equal
};

ScenarioComparison scenario_compare(const FitResult& fit, const ModelSpec& spec,
                                    const CovariateVector& z_base, const CovariateVector& z_alt,
                                    double t);

}  // namespace yieldmsm
