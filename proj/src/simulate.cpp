#include "yieldmsm/simulate.hpp"

#include <cmath>
#include <random>

#include "yieldmsm/error.hpp"

namespace yieldmsm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Uniform on (0, 1], built from the top 53 bits so results do not depend on
// the standard library's distribution implementations.
double uniform_open_closed(std::mt19937_64& rng) {
    return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

SimulatedPath run_path(const ParameterSet& theta, const ModelSpec& spec,
                       const CovariateTrajectory& trajectory, int initial_state, double horizon,
                       std::mt19937_64& rng, std::string subject_id) {
    if (!spec.states().contains(initial_state)) {
        throw InputError("initial state " + std::to_string(initial_state) + " out of range");
    }
    if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
        throw InputError("simulation horizon must be finite and non-negative");
    }
    std::vector<Matrix> daily_q;
    daily_q.reserve(trajectory.n_days());
    for (const auto& z : trajectory.daily()) {
        daily_q.push_back(assemble_generator(theta, z, spec).matrix());
    }

    SimulatedPath path{std::move(subject_id), initial_state, {}};
    const int k = spec.n_states();
    const auto last_day = trajectory.n_days() - 1;
    int state = initial_state - 1;
    double t = 0.0;
    while (t < horizon) {
        const auto day = std::min(static_cast<std::size_t>(std::floor(t)), last_day);
        const Matrix& q = daily_q[day];
        const double segment_end =
            day < last_day ? std::min(static_cast<double>(day + 1), horizon) : horizon;
        const double exit = -q(state, state);
        if (!(exit > 0.0)) {
            t = segment_end;
            continue;
        }
        const double wait = -std::log(uniform_open_closed(rng)) / exit;
        if (t + wait >= segment_end) {
            t = segment_end;
            continue;
        }
        t += wait;
        const double target = uniform_open_closed(rng) * exit;
        double cumulative = 0.0;
        int next = -1;
        for (int s = 0; s < k; ++s) {
            if (s == state || !(q(state, s) > 0.0)) continue;
            cumulative += q(state, s);
            next = s;
            if (target <= cumulative) break;
        }
        state = next;
        path.jumps.emplace_back(t, state + 1);
    }
    return path;
}

}  // namespace

CovariateTrajectory::CovariateTrajectory(std::vector<CovariateVector> daily) : daily_(std::move(daily)) {
    if (daily_.empty()) throw InputError("covariate trajectory needs at least one day");
    for (const auto& z : daily_) {
        if (z.names() != daily_.front().names()) {
            throw InputError("covariate trajectory changes covariate names between days");
        }
    }
}

CovariateTrajectory CovariateTrajectory::constant(CovariateVector z) {
    return CovariateTrajectory(std::vector<CovariateVector>{std::move(z)});
}

const CovariateVector& CovariateTrajectory::on_day(std::size_t day) const {
    return daily_[std::min(day, daily_.size() - 1)];
}

const CovariateVector& CovariateTrajectory::at(double time) const {
    if (!(time >= 0.0)) throw InputError("trajectory queried at negative time");
    return on_day(static_cast<std::size_t>(std::floor(time)));
}

int SimulatedPath::state_at(double time) const {
    int state = initial_state;
    for (const auto& [when, next] : jumps) {
        if (when > time) break;
        state = next;
    }
    return state;
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t subject_index) {
    return splitmix64(seed + 0x9e3779b97f4a7c15ULL * (subject_index + 1));
}

SimulatedPath simulate_path(const ParameterSet& theta, const ModelSpec& spec,
                            const CovariateTrajectory& trajectory, int initial_state, double horizon,
                            std::uint64_t seed, std::string subject_id) {
    if (!(horizon > 0.0)) throw InputError("simulation horizon must be positive");
    std::mt19937_64 rng(splitmix64(seed));
    return run_path(theta, spec, trajectory, initial_state, horizon, rng, std::move(subject_id));
}

std::vector<CovariateTrajectory> random_trajectories(const ModelSpec& spec, int subjects, int days,
                                                     int groups, std::uint64_t seed) {
    if (subjects < 1 || days < 1 || groups < 1) {
        throw InputError("subjects, days and groups must all be positive");
    }
    std::vector<std::vector<CovariateVector>> per_group(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
        // The complemented seed keeps covariate streams apart from subject paths.
        std::mt19937_64 rng(substream_seed(~seed, static_cast<std::uint64_t>(g)));
        for (int d = 0; d < days; ++d) {
            std::vector<double> z(spec.n_covariates());
            for (auto& v : z) {
                // Box–Muller; cosine branch only.
                const double u1 = uniform_open_closed(rng);
                const double u2 = uniform_open_closed(rng);
                v = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
            }
            per_group[static_cast<std::size_t>(g)].emplace_back(spec.covariate_names(), std::move(z));
        }
    }
    std::vector<CovariateTrajectory> out;
    out.reserve(static_cast<std::size_t>(subjects));
    for (int i = 0; i < subjects; ++i) {
        out.emplace_back(per_group[static_cast<std::size_t>(i % groups)]);
    }
    return out;
}

PanelDataset sample_panel(const ParameterSet& theta, const ModelSpec& spec,
                          const std::vector<CovariateTrajectory>& trajectories,
                          const std::vector<double>& observation_times, std::uint64_t seed,
                          const std::vector<int>& initial_states) {
    if (observation_times.empty() || observation_times.front() != 0.0) {
        throw InputError("observation times must start at 0");
    }
    for (std::size_t i = 1; i < observation_times.size(); ++i) {
        if (!(observation_times[i] > observation_times[i - 1])) {
            throw InputError("observation times must be strictly increasing");
        }
    }
    if (!initial_states.empty() && initial_states.size() != trajectories.size()) {
        throw InputError("need one initial state per trajectory");
    }
    const double horizon = observation_times.back();
    std::vector<SubjectRecords> subjects;
    subjects.reserve(trajectories.size());
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        std::mt19937_64 rng(substream_seed(seed, i));
        int initial = 0;
        if (initial_states.empty()) {
            const double u = uniform_open_closed(rng);
            initial = std::min(spec.n_states(), static_cast<int>(std::ceil(u * spec.n_states())));
        } else {
            initial = initial_states[i];
        }
        const auto id = "S" + std::to_string(i + 1);
        const auto path = run_path(theta, spec, trajectories[i], initial, horizon, rng, id);

        SubjectRecords subject{id, {}};
        subject.observations.reserve(observation_times.size());
        for (double t : observation_times) {
            subject.observations.push_back(
                PanelObservation{t, path.state_at(t), trajectories[i].at(t).aligned_to(spec)});
        }
        subjects.push_back(std::move(subject));
    }
    return PanelDataset(spec.covariate_names(), std::move(subjects));
}

}  // namespace yieldmsm
