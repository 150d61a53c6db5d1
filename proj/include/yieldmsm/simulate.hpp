#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "yieldmsm/model.hpp"
#include "yieldmsm/panel.hpp"

namespace yieldmsm {

/// Daily covariates: entry d applies on [d, d+1); the last entry also covers
/// every later time.
class CovariateTrajectory {
public:
    explicit CovariateTrajectory(std::vector<CovariateVector> daily);
    /// A single setting held for all time.
    static CovariateTrajectory constant(CovariateVector z);

    std::size_t n_days() const { return daily_.size(); }
    const CovariateVector& on_day(std::size_t day) const;
    const CovariateVector& at(double time) const;
    const std::vector<CovariateVector>& daily() const { return daily_; }

private:
    std::vector<CovariateVector> daily_;
};

struct SimulatedPath {
    std::string subject_id;
    int initial_state = 0;
    std::vector<std::pair<double, int>> jumps;  // (jump time, new state)

    int state_at(double time) const;
};

/// Per-subject substream seed: splitmix64(seed + golden·(index + 1)).
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t subject_index);

/// Event-driven simulation with rates piecewise constant per day: an
/// exponential wait at the current exit rate that crosses a day boundary is
/// discarded and redrawn from the boundary with that day's rates.
SimulatedPath simulate_path(const ParameterSet& theta, const ModelSpec& spec,
                            const CovariateTrajectory& trajectory, int initial_state, double horizon,
                            std::uint64_t seed, std::string subject_id = "S1");

/// Daily covariates drawn iid standard normal for each of `groups` groups;
/// subject i follows group i % groups. Deterministic in `seed`.
std::vector<CovariateTrajectory> random_trajectories(const ModelSpec& spec, int subjects, int days,
                                                     int groups, std::uint64_t seed);

/// Simulates one path per trajectory and records the state and that day's
/// covariates at each observation time. Subject i (0-based) uses
/// substream_seed(seed, i); its initial state is `initial_states[i]` when
/// given, otherwise uniform over 1..K from the same substream.
PanelDataset sample_panel(const ParameterSet& theta, const ModelSpec& spec,
                          const std::vector<CovariateTrajectory>& trajectories,
                          const std::vector<double>& observation_times, std::uint64_t seed,
                          const std::vector<int>& initial_states = {});

}  // namespace yieldmsm
