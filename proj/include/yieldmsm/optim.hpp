#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "yieldmsm/likelihood.hpp"
#include "yieldmsm/model.hpp"
#include "yieldmsm/panel.hpp"

namespace yieldmsm {

enum class Algorithm { bfgs, nelder_mead };

std::string_view to_string(Algorithm algorithm);
/// Accepts "bfgs", "nelder-mead" and "nelder_mead".
Algorithm parse_algorithm(std::string_view text);

struct FitOptions {
    Algorithm algorithm = Algorithm::bfgs;
    int max_iterations = 500;            // BFGS iterations
    double gradient_tolerance = 1e-6;    // ∞-norm of the gradient
    double function_tolerance = 1e-9;    // relative objective change
    int max_evaluations = 5000;          // Nelder–Mead objective evaluations
    double simplex_tolerance = 1e-8;     // Nelder–Mead objective spread
    double simplex_step = 0.1;

    /// Throws InputError on non-positive tolerances or limits.
    void validate() const;
};

// ------------------------------------------------------------------
// Generic minimizers over R^n.

struct MinimizeResult {
    Vector x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

/// BFGS with Armijo backtracking (c1 = 1e-4, factor 0.5, initial step 1).
/// A non-finite trial value is treated as a failed Armijo test.
MinimizeResult minimize_bfgs(const Objective& f, const Vector& x0, const FitOptions& opts);

/// Nelder–Mead with reflection 1, expansion 2, contraction 0.5, shrink 0.5.
MinimizeResult minimize_nelder_mead(const Objective& f, const Vector& x0, const FitOptions& opts);

/// Central differences of numerical_gradient; the outer step is
/// outer_step · max(1, |x_j|). Symmetrized as (H + Hᵀ)/2.
Matrix finite_difference_hessian(const Objective& f, const Vector& x, double outer_step = 1e-4);

// ------------------------------------------------------------------
// Model fitting.

struct ObservedInformation {
    Matrix hessian;                        // of the negative log-likelihood
    std::vector<double> eigenvalues;       // ascending
    std::optional<double> condition_number;
    std::optional<Matrix> covariance;      // present only when positive definite

    bool positive_definite() const { return covariance.has_value(); }
};

/// Eigen-analysis of (H + Hᵀ)/2.
ObservedInformation analyze_hessian(Matrix hessian);

struct FitResult {
    Algorithm algorithm = Algorithm::bfgs;
    ParameterSet theta_hat;
    double log_likelihood = 0.0;
    double aic = 0.0;
    int n_parameters = 0;
    std::optional<Matrix> covariance;
    std::vector<double> hessian_eigenvalues;
    std::optional<double> condition_number;
    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
    std::vector<bool> boundary_flags;  // per allowed transition
    std::string message;

    bool identified() const { return covariance.has_value(); }
    /// sqrt of the covariance diagonal; empty when covariance is absent.
    std::vector<double> standard_errors() const;
};

/// 2k - 2ℓ
double akaike(int n_parameters, double log_likelihood);

/// q⁰_rs = (# observed r→s interval moves) / (time spent with left state r),
/// floored at 1e-3; betas 0. Unoccupied states produce a warning.
ParameterSet crude_initializer(const PanelDataset& data, const ModelSpec& spec,
                               std::vector<std::string>* warnings = nullptr);

ObservedInformation observed_information(const PanelDataset& data, const ModelSpec& spec,
                                         const ParameterSet& theta_hat);

/// Maximizes the panel log-likelihood from theta0, then evaluates the
/// observed information at the optimum.
FitResult fit(const PanelDataset& data, const ModelSpec& spec, const ParameterSet& theta0,
              const FitOptions& opts);

/// Per transition: baseline below 1e-6 day⁻¹ or any |beta| above 10.
std::vector<bool> boundary_flags(const ParameterSet& theta);

}  // namespace yieldmsm
