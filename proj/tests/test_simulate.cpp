#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/likelihood.hpp"
#include "yieldmsm/matexp.hpp"
#include "yieldmsm/simulate.hpp"

using namespace yieldmsm;

namespace {

std::vector<double> days(int n) {
    std::vector<double> t(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) t[static_cast<std::size_t>(d)] = d;
    return t;
}

}  // namespace

TEST_CASE("a state with negligible exit rates never jumps") {
    const auto spec = ModelSpec::three_state_constrained({});
    const auto theta = ParameterSet::from_rates(spec, {1e-12, 0.5, 0.5, 0.5});
    const auto traj = CovariateTrajectory::constant(CovariateVector::zeros(spec));
    const auto path = simulate_path(theta, spec, traj, 1, 1e4, 42);
    CHECK(path.jumps.empty());
    CHECK(path.state_at(5000.0) == 1);
}

TEST_CASE("simulation is deterministic in the seed") {
    const auto spec = ModelSpec::three_state_constrained({"RH"});
    const auto theta = ParameterSet::from_rates(spec, {0.3, 0.2, 0.25, 0.1}, {{0.5}, {0.0}, {-0.4}, {0.2}});
    const auto traj = random_trajectories(spec, 1, 50, 1, 9).front();
    const auto a = simulate_path(theta, spec, traj, 2, 50.0, 123);
    const auto b = simulate_path(theta, spec, traj, 2, 50.0, 123);
    CHECK(a.jumps == b.jumps);
    const auto c = simulate_path(theta, spec, traj, 2, 50.0, 124);
    CHECK(a.jumps != c.jumps);
}

TEST_CASE("paths respect the transition structure") {
    const auto spec = ModelSpec::three_state_constrained({});
    const auto theta = ParameterSet::from_rates(spec, {1.0, 0.7, 0.9, 1.2});
    const auto traj = CovariateTrajectory::constant(CovariateVector::zeros(spec));
    const auto path = simulate_path(theta, spec, traj, 1, 2000.0, 5);
    CHECK(path.jumps.size() > 1000);
    int state = path.initial_state;
    double last = 0.0;
    for (const auto& [t, next] : path.jumps) {
        CHECK(t > last);
        CHECK(next != state);
        CHECK(spec.transitions().allows(state, next));
        last = t;
        state = next;
    }
}

TEST_CASE("two-state occupancy at t = 2 matches the closed form") {
    const auto spec = test::two_state_spec();
    const auto theta = ParameterSet::from_rates(spec, {0.5, 0.5});
    const auto traj = CovariateTrajectory::constant(CovariateVector::zeros(spec));
    const int n = 10000;
    int in_one = 0;
    for (int i = 0; i < n; ++i) {
        in_one += simulate_path(theta, spec, traj, 1, 2.0, substream_seed(77, static_cast<std::uint64_t>(i)))
                          .state_at(2.0) == 1;
    }
    const double p = test::two_state_p11(0.5, 0.5, 2.0);
    CHECK(std::abs(static_cast<double>(in_one) / n - p) <= 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("day-boundary redraws follow the piecewise-constant chain") {
    const ModelSpec spec(StateSpace({"a", "b"}), TransitionStructure({{1, 2}, {2, 1}}, 2), {"x"});
    const auto theta = ParameterSet::from_rates(spec, {0.4, 0.3}, {{1.0}, {-0.8}});
    const CovariateTrajectory traj({CovariateVector({"x"}, {-1.0}), CovariateVector({"x"}, {1.5}),
                                    CovariateVector({"x"}, {0.2})});
    Matrix product = Matrix::Identity(2, 2);
    for (std::size_t d = 0; d < 3; ++d) {
        product *= transition_probability_matrix(assemble_generator(theta, traj.on_day(d), spec), 1.0).matrix();
    }
    const int n = 20000;
    int in_two = 0;
    for (int i = 0; i < n; ++i) {
        in_two += simulate_path(theta, spec, traj, 1, 3.0, substream_seed(2, static_cast<std::uint64_t>(i)))
                          .state_at(3.0) == 2;
    }
    const double p = product(0, 1);
    CHECK(std::abs(static_cast<double>(in_two) / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("sample_panel layout") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto theta = ParameterSet::from_rates(spec, {0.05, 0.04, 0.05, 0.03});
    const auto traj = random_trajectories(spec, 24, 62, 4, 1);
    const auto panel = sample_panel(theta, spec, traj, days(62), 1);
    CHECK(panel.subjects().size() == 24);
    CHECK(panel.n_observations() == 24 * 62);
    CHECK(panel.subjects()[0].id == "S1");
    CHECK(panel.subjects()[23].id == "S24");
    // Recorded covariates are that day's values.
    const auto& s5 = panel.subjects()[4];
    CHECK(s5.observations[10].covariates == traj[4].on_day(10).aligned_to(spec));

    const auto initial = sample_panel(theta, spec, traj, {0.0}, 1);
    CHECK(initial.n_observations() == 24);
    CHECK(initial.n_intervals() == 0);

    CHECK_THROWS_AS(sample_panel(theta, spec, traj, {1.0, 2.0}, 1), InputError);
    CHECK_THROWS_AS(sample_panel(theta, spec, traj, {0.0, 2.0, 2.0}, 1), InputError);
}

TEST_CASE("per-subject streams do not depend on the number of subjects") {
    const auto spec = ModelSpec::three_state_constrained({});
    const auto theta = ParameterSet::from_rates(spec, {0.2, 0.2, 0.2, 0.2});
    const auto z = CovariateTrajectory::constant(CovariateVector::zeros(spec));
    const auto few = sample_panel(theta, spec, std::vector<CovariateTrajectory>(3, z), days(30), 10);
    const auto many = sample_panel(theta, spec, std::vector<CovariateTrajectory>(9, z), days(30), 10);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t t = 0; t < 30; ++t) {
            CHECK(few.subjects()[i].observations[t].state == many.subjects()[i].observations[t].state);
        }
    }
}

TEST_CASE("the generating parameters score higher than a perturbed set") {
    const auto spec = ModelSpec::three_state_constrained({"RH"});
    const auto truth = ParameterSet::from_rates(spec, {0.1, 0.08, 0.09, 0.07}, {{0.4}, {-0.2}, {0.1}, {0.3}});
    auto perturbed_values = std::vector<double>(truth.values().begin(), truth.values().end());
    perturbed_values[1] += 0.5;
    const ParameterSet perturbed(spec, perturbed_values);
    double diff = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto panel = sample_panel(truth, spec, random_trajectories(spec, 24, 62, 4, seed), days(62), seed);
        diff += total_log_likelihood(panel, truth, spec) - total_log_likelihood(panel, perturbed, spec);
    }
    CHECK(diff / 20.0 > 0.0);
}

TEST_CASE("random trajectories") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto traj = random_trajectories(spec, 10, 200, 2, 3);
    REQUIRE(traj.size() == 10);
    CHECK(traj[0].daily() == traj[2].daily());
    CHECK(traj[0].daily() != traj[1].daily());
    double sum = 0.0, sq = 0.0;
    for (const auto& z : traj[0].daily()) {
        sum += z.values()[0];
        sq += z.values()[0] * z.values()[0];
    }
    CHECK(std::abs(sum / 200.0) < 0.3);
    CHECK(std::abs(sq / 200.0 - 1.0) < 0.3);
    CHECK(random_trajectories(spec, 10, 200, 2, 3)[1].daily() == traj[1].daily());
    CHECK_THROWS_AS(random_trajectories(spec, 0, 10, 1, 0), InputError);
}
