#include "yieldmsm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "yieldmsm/error.hpp"

namespace yieldmsm {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kBacktrack = 0.5;
constexpr int kMaxBacktracks = 60;
constexpr double kInitialFloor = 1e-3;
constexpr double kBoundaryRate = 1e-6;
constexpr double kBoundaryBeta = 10.0;

double safe_eval(const Objective& f, const Vector& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
    return algorithm == Algorithm::bfgs ? "bfgs" : "nelder-mead";
}

Algorithm parse_algorithm(std::string_view text) {
    if (text == "bfgs" || text == "BFGS") return Algorithm::bfgs;
    if (text == "nelder-mead" || text == "nelder_mead" || text == "Nelder-Mead") {
        return Algorithm::nelder_mead;
    }
    throw InputError("unknown algorithm '" + std::string(text) + "' (expected bfgs or nelder-mead)");
}

void FitOptions::validate() const {
    if (max_iterations < 1) throw InputError("max_iterations must be >= 1");
    if (max_evaluations < 1) throw InputError("max_evaluations must be >= 1");
    if (!(gradient_tolerance > 0.0)) throw InputError("gradient_tolerance must be > 0");
    if (!(function_tolerance > 0.0)) throw InputError("function_tolerance must be > 0");
    if (!(simplex_tolerance > 0.0)) throw InputError("simplex_tolerance must be > 0");
    if (!(simplex_step > 0.0)) throw InputError("simplex_step must be > 0");
}

// ---------------------------------------------------------------------- BFGS

MinimizeResult minimize_bfgs(const Objective& f, const Vector& x0, const FitOptions& opts) {
    opts.validate();
    const Eigen::Index n = x0.size();
    MinimizeResult result;
    result.x = x0;

    int evaluations = 0;
    auto eval = [&](const Vector& x) {
        ++evaluations;
        return safe_eval(f, x);
    };
    auto gradient = [&](const Vector& x) {
        return numerical_gradient([&](const Vector& p) { return eval(p); }, x);
    };

    Vector x = x0;
    double fx = eval(x);
    if (!std::isfinite(fx)) {
        result.value = fx;
        result.evaluations = evaluations;
        result.message = "objective is not finite at the starting point";
        return result;
    }

    Vector g;
    try {
        g = gradient(x);
    } catch (const NumericalError& e) {
        result.value = fx;
        result.evaluations = evaluations;
        result.message = e.what();
        return result;
    }

    Matrix h_inv = Matrix::Identity(n, n);
    bool identity_h = true;
    bool scaled = false;
    int iteration = 0;

    while (true) {
        if (g.lpNorm<Eigen::Infinity>() < opts.gradient_tolerance) {
            result.converged = true;
            result.message = "gradient tolerance reached";
            break;
        }
        if (iteration >= opts.max_iterations) {
            result.message = "iteration limit reached";
            break;
        }

        Vector direction = -h_inv * g;
        double slope = g.dot(direction);
        if (!(slope < 0.0)) {
            h_inv.setIdentity();
            identity_h = true;
            direction = -g;
            slope = g.dot(direction);
        }

        double step = 1.0;
        Vector x_new;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int k = 0; k < kMaxBacktracks; ++k) {
            x_new = x + step * direction;
            f_new = eval(x_new);
            if (std::isfinite(f_new) && f_new <= fx + kArmijo * step * slope && f_new <= fx) {
                accepted = true;
                break;
            }
            step *= kBacktrack;
        }
        if (!accepted) {
            if (!identity_h) {
                h_inv.setIdentity();
                identity_h = true;
                continue;
            }
            result.message = "line search failed to find an Armijo step";
            break;
        }

        Vector g_new;
        try {
            g_new = gradient(x_new);
        } catch (const NumericalError& e) {
            x = x_new;
            fx = f_new;
            ++iteration;
            result.message = std::string("gradient failed: ") + e.what();
            break;
        }

        const Vector s = x_new - x;
        const Vector y = g_new - g;
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (!scaled) {
                h_inv = Matrix::Identity(n, n) * (sy / y.squaredNorm());
                scaled = true;
            }
            const double rho = 1.0 / sy;
            const Matrix left = Matrix::Identity(n, n) - rho * s * y.transpose();
            h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
            identity_h = false;
        }

        const double change = std::abs(fx - f_new) / std::max(1.0, std::abs(fx));
        x = x_new;
        fx = f_new;
        g = g_new;
        ++iteration;

        if (change < opts.function_tolerance) {
            result.converged = true;
            result.message = "relative function change below tolerance";
            break;
        }
    }

    result.x = x;
    result.value = fx;
    result.iterations = iteration;
    result.evaluations = evaluations;
    return result;
}

// --------------------------------------------------------------- Nelder–Mead

MinimizeResult minimize_nelder_mead(const Objective& f, const Vector& x0, const FitOptions& opts) {
    opts.validate();
    const auto n = static_cast<std::size_t>(x0.size());
    int evaluations = 0;
    auto eval = [&](const Vector& x) {
        ++evaluations;
        return safe_eval(f, x);
    };

    std::vector<Vector> simplex(n + 1, x0);
    std::vector<double> values(n + 1);
    for (std::size_t i = 1; i <= n; ++i) simplex[i][static_cast<Eigen::Index>(i - 1)] += opts.simplex_step;
    for (std::size_t i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<std::size_t> order(n + 1);
    MinimizeResult result;
    int iteration = 0;

    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        std::vector<Vector> s(n + 1);
        std::vector<double> v(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            s[i] = simplex[order[i]];
            v[i] = values[order[i]];
        }
        simplex = std::move(s);
        values = std::move(v);
    };

    while (true) {
        sort_simplex();
        if (values[n] - values[0] < opts.simplex_tolerance) {
            result.converged = true;
            result.message = "simplex spread below tolerance";
            break;
        }
        if (evaluations >= opts.max_evaluations) {
            result.message = "evaluation limit reached";
            break;
        }
        ++iteration;

        Vector centroid = Vector::Zero(x0.size());
        for (std::size_t i = 0; i < n; ++i) centroid += simplex[i];
        centroid /= static_cast<double>(n);

        const Vector& worst = simplex[n];
        const Vector reflected = centroid + (centroid - worst);
        const double f_reflected = eval(reflected);

        if (f_reflected < values[0]) {
            const Vector expanded = centroid + 2.0 * (centroid - worst);
            const double f_expanded = eval(expanded);
            if (f_expanded < f_reflected) {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if (f_reflected < values[n - 1]) {
            simplex[n] = reflected;
            values[n] = f_reflected;
            continue;
        }

        bool contracted = false;
        if (f_reflected < values[n]) {
            const Vector outside = centroid + 0.5 * (reflected - centroid);
            const double f_outside = eval(outside);
            if (f_outside <= f_reflected) {
                simplex[n] = outside;
                values[n] = f_outside;
                contracted = true;
            }
        } else {
            const Vector inside = centroid + 0.5 * (worst - centroid);
            const double f_inside = eval(inside);
            if (f_inside < values[n]) {
                simplex[n] = inside;
                values[n] = f_inside;
                contracted = true;
            }
        }
        if (!contracted) {
            for (std::size_t i = 1; i <= n; ++i) {
                simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0]);
                values[i] = eval(simplex[i]);
            }
        }
    }

    result.x = simplex[0];
    result.value = values[0];
    result.iterations = iteration;
    result.evaluations = evaluations;
    return result;
}

// ------------------------------------------------------------------- Hessian

Matrix finite_difference_hessian(const Objective& f, const Vector& x, double outer_step) {
    const Eigen::Index n = x.size();
    Matrix h(n, n);
    Vector probe = x;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double step = outer_step * std::max(1.0, std::abs(x[j]));
        probe[j] = x[j] + step;
        const Vector up = numerical_gradient(f, probe);
        probe[j] = x[j] - step;
        const Vector down = numerical_gradient(f, probe);
        probe[j] = x[j];
        h.col(j) = (up - down) / (2.0 * step);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double avg = 0.5 * (h(i, j) + h(j, i));
            h(i, j) = avg;
            h(j, i) = avg;
        }
    }
    return h;
}

ObservedInformation analyze_hessian(Matrix hessian) {
    ObservedInformation info;
    info.hessian = 0.5 * (hessian + hessian.transpose());
    if (!info.hessian.allFinite()) return info;
    Eigen::SelfAdjointEigenSolver<Matrix> solver(info.hessian);
    if (solver.info() != Eigen::Success) return info;
    const Vector& lambda = solver.eigenvalues();
    info.eigenvalues.assign(lambda.data(), lambda.data() + lambda.size());
    if (lambda.size() > 0 && lambda[0] > 0.0) {
        info.condition_number = lambda[lambda.size() - 1] / lambda[0];
        const Matrix& v = solver.eigenvectors();
        Matrix cov = v * lambda.cwiseInverse().asDiagonal() * v.transpose();
        info.covariance = 0.5 * (cov + cov.transpose());
    }
    return info;
}

// ------------------------------------------------------------------ Fitting

std::vector<double> FitResult::standard_errors() const {
    std::vector<double> se;
    if (!covariance) return se;
    for (Eigen::Index i = 0; i < covariance->rows(); ++i) se.push_back(std::sqrt((*covariance)(i, i)));
    return se;
}

double akaike(int n_parameters, double log_likelihood) {
    return 2.0 * n_parameters - 2.0 * log_likelihood;
}

ParameterSet crude_initializer(const PanelDataset& data, const ModelSpec& spec,
                               std::vector<std::string>* warnings) {
    data.check_states(spec);
    const auto k = static_cast<std::size_t>(spec.n_states());
    std::vector<double> time_in(k, 0.0);
    std::vector<std::vector<double>> moves(k, std::vector<double>(k, 0.0));
    for (const auto& subject : data.subjects()) {
        const auto& obs = subject.observations;
        for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
            const auto r = static_cast<std::size_t>(obs[i].state - 1);
            const auto s = static_cast<std::size_t>(obs[i + 1].state - 1);
            time_in[r] += obs[i + 1].time - obs[i].time;
            if (r != s) moves[r][s] += 1.0;
        }
    }
    for (std::size_t r = 0; r < k; ++r) {
        if (time_in[r] == 0.0 && warnings) {
            warnings->push_back("state " + std::to_string(r + 1) +
                                " is never occupied at an interval start; its exit rates start at the floor");
        }
    }
    std::vector<double> baselines;
    for (const auto& t : spec.transitions().allowed()) {
        const auto r = static_cast<std::size_t>(t.from - 1);
        const auto s = static_cast<std::size_t>(t.to - 1);
        const double rate = time_in[r] > 0.0 ? moves[r][s] / time_in[r] : 0.0;
        baselines.push_back(std::max(rate, kInitialFloor));
    }
    return ParameterSet::from_rates(spec, baselines);
}

namespace {

Objective negative_log_likelihood(const PanelDataset& data, const ModelSpec& spec) {
    return [&data, &spec](const Vector& x) {
        try {
            const ParameterSet theta(spec, std::vector<double>(x.data(), x.data() + x.size()));
            return -total_log_likelihood(data, theta, spec);
        } catch (const NumericalError&) {
            return std::numeric_limits<double>::infinity();
        } catch (const InputError&) {
            // Non-finite trial parameters.
            return std::numeric_limits<double>::infinity();
        }
    };
}

}  // namespace

ObservedInformation observed_information(const PanelDataset& data, const ModelSpec& spec,
                                         const ParameterSet& theta_hat) {
    const auto projected = data.select_covariates(spec);
    projected.check_states(spec);
    const auto objective = negative_log_likelihood(projected, spec);
    return analyze_hessian(finite_difference_hessian(objective, theta_hat.as_vector()));
}

std::vector<bool> boundary_flags(const ParameterSet& theta) {
    std::vector<bool> flags(theta.n_transitions(), false);
    for (std::size_t k = 0; k < theta.n_transitions(); ++k) {
        bool flag = theta.baseline(k) < kBoundaryRate;
        for (double b : theta.betas(k)) flag = flag || std::abs(b) > kBoundaryBeta;
        flags[k] = flag;
    }
    return flags;
}

FitResult fit(const PanelDataset& data, const ModelSpec& spec, const ParameterSet& theta0,
              const FitOptions& opts) {
    opts.validate();
    const auto projected = data.select_covariates(spec);
    projected.check_states(spec);

    const auto start = evaluate_log_likelihood(projected, theta0, spec);
    if (start.impossible) {
        throw NumericalError("log-likelihood is -inf at the starting values: " +
                             start.impossible->describe());
    }
    if (!std::isfinite(start.value)) {
        throw NumericalError("log-likelihood is not finite at the starting values");
    }

    const auto objective = negative_log_likelihood(projected, spec);
    const Vector x0 = theta0.as_vector();
    const MinimizeResult min = opts.algorithm == Algorithm::bfgs
                                   ? minimize_bfgs(objective, x0, opts)
                                   : minimize_nelder_mead(objective, x0, opts);

    FitResult result{
        .algorithm = opts.algorithm,
        .theta_hat = ParameterSet(spec, std::vector<double>(min.x.data(), min.x.data() + min.x.size())),
    };
    result.log_likelihood = total_log_likelihood(projected, result.theta_hat, spec);
    result.n_parameters = static_cast<int>(spec.n_parameters());
    result.aic = akaike(result.n_parameters, result.log_likelihood);
    result.converged = min.converged;
    result.iterations = min.iterations;
    result.evaluations = min.evaluations;
    result.message = min.message;
    result.boundary_flags = boundary_flags(result.theta_hat);

    try {
        auto info = analyze_hessian(finite_difference_hessian(objective, min.x));
        result.hessian_eigenvalues = std::move(info.eigenvalues);
        result.condition_number = info.condition_number;
        result.covariance = std::move(info.covariance);
        if (!result.covariance) result.message += "; observed information is not positive definite";
    } catch (const NumericalError& e) {
        result.message += std::string("; observed information failed: ") + e.what();
    }
    return result;
}

}  // namespace yieldmsm
