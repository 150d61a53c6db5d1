#include "yieldmsm/likelihood.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <unordered_map>

#include "yieldmsm/csv.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/matexp.hpp"

namespace yieldmsm {

namespace {

// Exact-value cache key: Δt followed by the covariate vector, compared bitwise.
using CacheKey = std::vector<std::uint64_t>;

struct CacheKeyHash {
    std::size_t operator()(const CacheKey& key) const noexcept {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (auto w : key) {
            h ^= w + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<std::size_t>(h);
    }
};

CacheKey make_key(double dt, const std::vector<double>& z) {
    CacheKey key;
    key.reserve(z.size() + 1);
    key.push_back(std::bit_cast<std::uint64_t>(dt));
    for (double v : z) key.push_back(std::bit_cast<std::uint64_t>(v));
    return key;
}

void check_interval(const PanelObservation& from, const PanelObservation& to, const ModelSpec& spec) {
    if (!(to.time > from.time)) throw InputError("interval end must be after its start");
    if (!spec.states().contains(from.state) || !spec.states().contains(to.state)) {
        throw InputError("observed state outside 1.." + std::to_string(spec.n_states()));
    }
}

}  // namespace

double interval_log_likelihood(const PanelObservation& from, const PanelObservation& to,
                               const ParameterSet& theta, const ModelSpec& spec) {
    check_interval(from, to, spec);
    const auto q = assemble_generator(theta, std::span<const double>(from.covariates), spec);
    const auto p = transition_probability_matrix(q, to.time - from.time);
    const double prob = p(from.state - 1, to.state - 1);
    return prob > 0.0 ? std::log(prob) : -std::numeric_limits<double>::infinity();
}

std::string ImpossibleInterval::describe() const {
    return "subject '" + subject_id + "': observed move " + std::to_string(state_from) + "->" +
           std::to_string(state_to) + " between t=" + csv::format_exact(time_from) +
           " and t=" + csv::format_exact(time_to) + " has probability zero";
}

LikelihoodValue evaluate_log_likelihood(const PanelDataset& data, const ParameterSet& theta,
                                        const ModelSpec& spec) {
    if (data.covariate_names() != spec.covariate_names()) {
        return evaluate_log_likelihood(data.select_covariates(spec), theta, spec);
    }
    data.check_states(spec);

    std::unordered_map<CacheKey, Matrix, CacheKeyHash> cache;
    LikelihoodValue result;
    for (const auto& subject : data.subjects()) {
        const auto& obs = subject.observations;
        double subject_sum = 0.0;
        for (std::size_t i = 0; i + 1 < obs.size(); ++i) {
            const double dt = obs[i + 1].time - obs[i].time;
            auto key = make_key(dt, obs[i].covariates);
            auto it = cache.find(key);
            if (it == cache.end()) {
                const auto q = assemble_generator(theta, std::span<const double>(obs[i].covariates), spec);
                it = cache.emplace(std::move(key), transition_probability_matrix(q, dt).matrix()).first;
            }
            const double prob = it->second(obs[i].state - 1, obs[i + 1].state - 1);
            if (!(prob > 0.0)) {
                result.value = -std::numeric_limits<double>::infinity();
                result.impossible = ImpossibleInterval{subject.id, obs[i].time, obs[i + 1].time,
                                                       obs[i].state, obs[i + 1].state};
                return result;
            }
            subject_sum += std::log(prob);
        }
        result.value += subject_sum;
    }
    return result;
}

double total_log_likelihood(const PanelDataset& data, const ParameterSet& theta,
                            const ModelSpec& spec) {
    return evaluate_log_likelihood(data, theta, spec).value;
}

Vector numerical_gradient(const Objective& objective, const Vector& x, double step) {
    const Eigen::Index n = x.size();
    Vector grad(n);
    Vector probe = x;
    for (Eigen::Index j = 0; j < n; ++j) {
        double h = step * std::max(1.0, std::abs(x[j]));
        double slope = std::numeric_limits<double>::quiet_NaN();
        for (int attempt = 0; attempt < 2; ++attempt) {
            probe[j] = x[j] + h;
            const double up = objective(probe);
            probe[j] = x[j] - h;
            const double down = objective(probe);
            probe[j] = x[j];
            if (std::isfinite(up) && std::isfinite(down)) {
                slope = (up - down) / (2.0 * h);
                break;
            }
            h /= 10.0;
        }
        if (!std::isfinite(slope)) {
            throw NumericalError("objective is not finite around coordinate " + std::to_string(j));
        }
        grad[j] = slope;
    }
    return grad;
}

}  // namespace yieldmsm
