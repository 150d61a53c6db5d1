#pragma once

#include "yieldmsm/model.hpp"

namespace yieldmsm {

/// Row-stochastic K×K matrix P(t) = exp(tQ) for horizon t (days).
class ProbabilityMatrix {
public:
    ProbabilityMatrix(Matrix p, double horizon);

    const Matrix& matrix() const { return p_; }
    double horizon() const { return horizon_; }
    int size() const { return static_cast<int>(p_.rows()); }
    double operator()(int row, int col) const { return p_(row, col); }

private:
    Matrix p_;
    double horizon_;
};

/// exp(tQ) by scaling and squaring around a diagonal [8/8] Padé approximant.
///
/// Round-off negatives down to -1e-12 are clamped to zero and rows
/// renormalized; anything larger raises NumericalError. Entries (r,s) with s
/// unreachable from r through Q's non-zero pattern are exactly zero.
ProbabilityMatrix transition_probability_matrix(const GeneratorMatrix& q, double t);

/// Independent cross-check: exp(tQ) = Σ_n Pois(n; λt) Rⁿ with R = I + Q/λ and
/// λ = max|q_rr|. The Poisson tail beyond the last term is at most `tol`.
ProbabilityMatrix uniformization_oracle(const GeneratorMatrix& q, double t, double tol = 1e-12);

}  // namespace yieldmsm
