#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "yieldmsm/inference.hpp"
#include "yieldmsm/optim.hpp"

namespace yieldmsm {

/// Structured fit report: named estimates with standard errors, logLik,
/// AIC, Hessian eigenvalues, condition number, plus the full-precision
/// parameter vector and covariance so the report can be read back.
nlohmann::json fit_result_to_json(const FitResult& fit, const ModelSpec& spec);
FitResult fit_result_from_json(const nlohmann::json& j, const ModelSpec& spec);
/// The model stored in a fit report.
ModelSpec model_from_fit_json(const nlohmann::json& j);

/// "from,<label...>" header, one row per state, 6 significant digits.
void write_matrix_csv(std::ostream& out, const Matrix& m, const StateSpace& states);

/// transition,covariate,hr,lo,hi,unstable
void write_hazard_ratio_csv(std::ostream& out, const std::vector<HazardRatioEntry>& entries);

/// state,label,sojourn_days,lo,hi
void write_sojourn_csv(std::ostream& out, const std::vector<SojournSummary>& sojourns,
                       const StateSpace& states);

/// model,algorithm,logLik,AIC: one row per fit.
void write_comparison_csv(std::ostream& out, const std::vector<std::pair<std::string, FitResult>>& fits);

/// Scenario deltas in long form: from,to,base,alternative,delta, then sojourns.
void write_scenario_csv(std::ostream& out, const ScenarioComparison& cmp, const StateSpace& states);

/// Human-readable fit summary.
std::string fit_summary_text(const FitResult& fit, const ModelSpec& spec);

}  // namespace yieldmsm
