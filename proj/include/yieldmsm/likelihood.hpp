#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "yieldmsm/model.hpp"
#include "yieldmsm/panel.hpp"

namespace yieldmsm {

/// log P(Δt; Q(z_from))[from.state, to.state]. Covariates are held at the
/// interval's left endpoint and must be in the model's covariate order.
/// Returns -inf for a structurally unreachable observed move.
double interval_log_likelihood(const PanelObservation& from, const PanelObservation& to,
                               const ParameterSet& theta, const ModelSpec& spec);

struct ImpossibleInterval {
    std::string subject_id;
    double time_from = 0.0;
    double time_to = 0.0;
    int state_from = 0;
    int state_to = 0;

    std::string describe() const;
};

struct LikelihoodValue {
    double value = 0.0;
    /// First interval (canonical order) with zero probability; value is -inf then.
    std::optional<ImpossibleInterval> impossible;
};

/// Sum over subjects and consecutive observation pairs, in dataset order.
/// P(Δt; Q(z)) is cached per exact (Δt, z) within one call.
LikelihoodValue evaluate_log_likelihood(const PanelDataset& data, const ParameterSet& theta,
                                        const ModelSpec& spec);

double total_log_likelihood(const PanelDataset& data, const ParameterSet& theta,
                            const ModelSpec& spec);

using Objective = std::function<double(const Vector&)>;

/// Central differences with h_j = step · max(1, |x_j|). A non-finite probe
/// shrinks that coordinate's step tenfold once; if it is still non-finite a
/// NumericalError names the coordinate.
Vector numerical_gradient(const Objective& objective, const Vector& x, double step = 1e-6);

}  // namespace yieldmsm
