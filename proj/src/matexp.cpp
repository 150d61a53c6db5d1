#include "yieldmsm/matexp.hpp"

#include <array>
#include <cmath>
#include <string>

#include "yieldmsm/error.hpp"

namespace yieldmsm {

namespace {

constexpr double kClampTolerance = 1e-12;
constexpr double kStochasticTolerance = 1e-10;
constexpr double kMaxUniformizationLoad = 1e4;

// Diagonal Padé [8/8] coefficients c_j = (16-j)! 8! / (16! j! (8-j)!).
constexpr std::array<double, 9> kPade8 = {
    1.0,
    1.0 / 2.0,
    7.0 / 60.0,
    1.0 / 60.0,
    1.0 / 624.0,
    1.0 / 9360.0,
    1.0 / 205920.0,
    1.0 / 7207200.0,
    1.0 / 518918400.0,
};

Matrix reachable_mask(const Matrix& q) {
    const Eigen::Index n = q.rows();
    Matrix reach = Matrix::Identity(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index s = 0; s < n; ++s)
            if (r != s && q(r, s) > 0.0) reach(r, s) = 1.0;
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index i = 0; i < n; ++i)
            if (reach(i, k) != 0.0)
                for (Eigen::Index j = 0; j < n; ++j)
                    if (reach(k, j) != 0.0) reach(i, j) = 1.0;
    return reach;
}

// Clamp round-off negatives, zero unreachable entries and renormalize rows.
Matrix finalize_stochastic(Matrix p, const Matrix& reach) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index s = 0; s < p.cols(); ++s) {
            if (reach(r, s) == 0.0) {
                p(r, s) = 0.0;
            } else if (p(r, s) < 0.0) {
                if (p(r, s) < -kClampTolerance) {
                    throw NumericalError("matrix exponential produced entry (" +
                                         std::to_string(r + 1) + "," + std::to_string(s + 1) +
                                         ") = " + std::to_string(p(r, s)));
                }
                p(r, s) = 0.0;
            }
        }
        const double sum = p.row(r).sum();
        if (!(sum > 0.0)) throw NumericalError("matrix exponential produced a zero row");
        p.row(r) /= sum;
    }
    return p;
}

void check_horizon(double t) {
    if (!std::isfinite(t)) throw InputError("horizon must be finite");
    if (t < 0.0) throw InputError("horizon must be non-negative, got " + std::to_string(t));
}

}  // namespace

ProbabilityMatrix::ProbabilityMatrix(Matrix p, double horizon) : p_(std::move(p)), horizon_(horizon) {
    if (p_.rows() != p_.cols()) throw InputError("probability matrix must be square");
    for (Eigen::Index r = 0; r < p_.rows(); ++r) {
        for (Eigen::Index s = 0; s < p_.cols(); ++s) {
            const double v = p_(r, s);
            if (!(v >= -kStochasticTolerance && v <= 1.0 + kStochasticTolerance)) {
                throw NumericalError("probability entry (" + std::to_string(r + 1) + "," +
                                     std::to_string(s + 1) + ") outside [0,1]");
            }
        }
        if (std::abs(p_.row(r).sum() - 1.0) > kStochasticTolerance) {
            throw NumericalError("probability row " + std::to_string(r + 1) + " does not sum to 1");
        }
    }
}

ProbabilityMatrix transition_probability_matrix(const GeneratorMatrix& q, double t) {
    check_horizon(t);
    const Eigen::Index n = q.size();
    if (t == 0.0) return ProbabilityMatrix(Matrix::Identity(n, n), t);

    Matrix a = t * q.matrix();
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
        a /= std::ldexp(1.0, squarings);
    }

    // N = Σ c_j A^j, D = Σ c_j (-A)^j; even and odd parts share the powers.
    const Matrix id = Matrix::Identity(n, n);
    Matrix even = kPade8[0] * id;
    Matrix odd = Matrix::Zero(n, n);
    Matrix power = id;
    for (std::size_t j = 1; j < kPade8.size(); ++j) {
        power = power * a;
        if (j % 2 == 0) {
            even += kPade8[j] * power;
        } else {
            odd += kPade8[j] * power;
        }
    }
    Matrix p = (even - odd).partialPivLu().solve(even + odd);
    for (int i = 0; i < squarings; ++i) p = p * p;

    return ProbabilityMatrix(finalize_stochastic(std::move(p), reachable_mask(q.matrix())), t);
}

ProbabilityMatrix uniformization_oracle(const GeneratorMatrix& q, double t, double tol) {
    check_horizon(t);
    if (!(tol > 0.0 && tol <= 1e-6)) throw InputError("uniformization tolerance must lie in (0, 1e-6]");
    const Eigen::Index n = q.size();
    const double lambda = q.max_exit_rate();
    if (lambda <= 0.0 || t == 0.0) return ProbabilityMatrix(Matrix::Identity(n, n), t);
    const double load = lambda * t;
    if (load > kMaxUniformizationLoad) {
        throw InputError("t * max|q_rr| = " + std::to_string(load) +
                         " exceeds the supported range of the uniformization oracle");
    }

    const Matrix jump = Matrix::Identity(n, n) + q.matrix() / lambda;
    const double log_load = std::log(load);
    auto weight = [&](double k) { return std::exp(-load + k * log_load - std::lgamma(k + 1.0)); };

    Matrix p = Matrix::Zero(n, n);
    Matrix power = Matrix::Identity(n, n);
    for (long k = 0;; ++k) {
        p += weight(static_cast<double>(k)) * power;
        // Tail Σ_{j>k} w_j ≤ w_{k+1} / (1 - load/(k+2)) once k+2 > load.
        const double next = static_cast<double>(k + 1);
        if (next + 1.0 > load) {
            const double bound = weight(next) / (1.0 - load / (next + 1.0));
            if (bound <= tol) break;
        }
        power = power * jump;
    }
    return ProbabilityMatrix(finalize_stochastic(std::move(p), reachable_mask(q.matrix())), t);
}

}  // namespace yieldmsm
