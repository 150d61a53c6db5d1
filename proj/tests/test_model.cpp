#include <doctest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/model.hpp"

using namespace yieldmsm;

TEST_CASE("transition parsing") {
    const auto t = Transition::parse("2->3");
    CHECK(t.from == 2);
    CHECK(t.to == 3);
    CHECK(t.name() == "2->3");
    CHECK_THROWS_AS(Transition::parse("1->1"), InputError);
    CHECK_THROWS_AS(Transition::parse("1-2"), InputError);
    CHECK_THROWS_AS(Transition::parse("a->b"), InputError);
}

TEST_CASE("state space and structure validation") {
    CHECK_THROWS_AS(StateSpace({"only"}), InputError);
    CHECK_THROWS_AS(StateSpace({"x", "x"}), InputError);
    CHECK_THROWS_AS(TransitionStructure({{1, 4}}, 3), InputError);
    CHECK_THROWS_AS(TransitionStructure({{1, 2}, {1, 2}}, 3), InputError);

    const auto spec = ModelSpec::three_state_constrained({});
    CHECK(spec.transitions().strongly_connected());
    CHECK_FALSE(spec.transitions().allows(1, 3));
    CHECK_FALSE(spec.transitions().allows(3, 1));
    const TransitionStructure one_way({{1, 2}, {2, 3}}, 3);
    CHECK_FALSE(one_way.strongly_connected());
    const auto reach = one_way.reachability();
    CHECK(reach[0][2]);
    CHECK_FALSE(reach[2][0]);
}

TEST_CASE("parameter count is |allowed| x (1 + p)") {
    CHECK(ModelSpec::three_state_constrained({"CO2", "RH", "PAR"}).n_parameters() == 16);
    CHECK(ModelSpec::three_state_constrained({"CO2", "RH", "PAR", "GH-1", "GH-2", "GH-4"}).n_parameters() == 28);
    const auto names = ModelSpec::three_state_constrained({"RH"}).parameter_names();
    REQUIRE(names.size() == 8);
    CHECK(names[0] == "q⁰(1->2)");
    CHECK(names[1] == "beta(1->2, RH)");
    CHECK(names[7] == "beta(3->2, RH)");
}

TEST_CASE("assemble_generator reproduces the GH-3 intensities") {
    const auto spec = ModelSpec::three_state_constrained({});
    const auto theta = ParameterSet::from_rates(spec, {0.005, 0.021, 0.022, 1e-9});
    const auto q = assemble_generator(theta, CovariateVector::zeros(spec), spec);
    const Matrix expected = test::gh3_generator();
    CHECK(test::max_abs_diff(q.matrix(), expected) < 5e-4);
    CHECK(std::abs(q(2, 2)) < 1e-8);
}

TEST_CASE("baselines pass through exactly at z = 0 with zero betas") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto theta = ParameterSet::from_rates(spec, {0.038, 0.026, 0.040, 0.018});
    const auto q = assemble_generator(theta, CovariateVector::zeros(spec), spec);
    CHECK(q(0, 1) == std::exp(std::log(0.038)));
    CHECK(q(1, 0) == std::exp(std::log(0.026)));
    CHECK(q(1, 2) == std::exp(std::log(0.040)));
    CHECK(q(2, 1) == std::exp(std::log(0.018)));
}

TEST_CASE("RH hazard ratio applied to the pooled baseline") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto theta = ParameterSet::from_rates(spec, {0.038, 0.026, 0.040, 0.018},
                                                {{std::log(5.10), 0.0}, {0, 0}, {0, 0}, {0, 0}});
    const auto z = CovariateVector::zeros(spec).with("RH", 1.0);
    const auto q = assemble_generator(theta, z, spec);
    CHECK(q(0, 1) == doctest::Approx(0.1938).epsilon(1e-12));
    CHECK(q(1, 2) == doctest::Approx(0.040).epsilon(1e-12));
}

TEST_CASE("generator invariants hold for random parameters") {
    const auto spec = ModelSpec::three_state_constrained({"x", "y"});
    std::mt19937_64 rng(11);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> values(spec.n_parameters());
        for (auto& v : values) v = normal(rng);
        const ParameterSet theta(spec, values);
        const CovariateVector z(spec.covariate_names(), {normal(rng), normal(rng)});
        const auto q = assemble_generator(theta, z, spec);
        for (int r = 0; r < 3; ++r) {
            CHECK(std::abs(q.matrix().row(r).sum()) <= 1e-12 * std::max(1.0, q.max_exit_rate()));
            for (int s = 0; s < 3; ++s) {
                if (r != s) CHECK(q(r, s) >= 0.0);
            }
        }
        CHECK(q(0, 2) == 0.0);
        CHECK(q(2, 0) == 0.0);

        // A unit bump in covariate k multiplies every allowed rate by exp(beta_k).
        for (std::size_t k = 0; k < 2; ++k) {
            const auto bumped = assemble_generator(theta, z.with(spec.covariate_names()[k], 1.0, true), spec);
            for (std::size_t a = 0; a < spec.n_transitions(); ++a) {
                const auto t = spec.transitions().allowed()[a];
                const double ratio = bumped(t.from - 1, t.to - 1) / q(t.from - 1, t.to - 1);
                CHECK(ratio == doctest::Approx(std::exp(theta.beta(a, k))).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("assemble_generator rejects bad inputs") {
    const auto spec = ModelSpec::three_state_constrained({"RH"});
    const auto theta = ParameterSet::zeros(spec);
    CHECK_THROWS_AS(assemble_generator(theta, CovariateVector({"PAR"}, {0.0}), spec), InputError);
    CHECK_THROWS_AS(ParameterSet(spec, std::vector<double>(8, NAN)), InputError);
    CHECK_THROWS_AS(ParameterSet(spec, std::vector<double>(7, 0.0)), InputError);
    try {
        std::vector<double> v(8, 0.0);
        v[3] = INFINITY;
        ParameterSet bad(spec, v);
        FAIL("expected rejection");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("beta(2->1, RH)") != std::string::npos);
    }
}

TEST_CASE("sojourn times") {
    const GeneratorMatrix gh3(test::gh3_generator());
    CHECK(sojourn_time(gh3, 2) == doctest::Approx(1.0 / 0.043).epsilon(1e-14));
    CHECK(sojourn_time(gh3, 2) == doctest::Approx(23.26).epsilon(1e-3));
    CHECK(std::isinf(sojourn_time(gh3, 3)));

    Matrix unit(2, 2);
    unit << -1.0, 1.0, 1.0, -1.0;
    CHECK(sojourn_time(GeneratorMatrix(unit), 1) == 1.0);

    Matrix pooled = Matrix::Zero(3, 3);
    pooled(0, 1) = 0.038;
    pooled(0, 0) = -0.038;
    CHECK(sojourn_time(GeneratorMatrix(pooled), 1) == doctest::Approx(26.3).epsilon(2e-3));
}

TEST_CASE("next-state distribution") {
    const GeneratorMatrix gh3(test::gh3_generator());
    const auto p = next_state_distribution(gh3, 2);
    CHECK(p[0] == doctest::Approx(0.488).epsilon(1e-3));
    CHECK(p[1] == 0.0);
    CHECK(p[2] == doctest::Approx(0.512).epsilon(1e-3));
    CHECK(std::abs(p[0] + p[2] - 1.0) <= 1e-12);

    const auto single = next_state_distribution(gh3, 1);
    CHECK(single[1] == 1.0);

    Matrix sym(3, 3);
    sym << -0.6, 0.3, 0.3, 0.1, -0.1, 0.0, 0.0, 0.2, -0.2;
    const auto even = next_state_distribution(GeneratorMatrix(sym), 1);
    CHECK(even[1] == 0.5);
    CHECK(even[2] == 0.5);

    CHECK_THROWS_AS(next_state_distribution(gh3, 3), NumericalError);
}

TEST_CASE("generator validation") {
    Matrix bad(2, 2);
    bad << -1.0, 1.0, 0.5, -0.4;
    CHECK_THROWS_AS(GeneratorMatrix{bad}, InputError);
    bad << 1.0, -1.0, 0.5, -0.5;
    CHECK_THROWS_AS(GeneratorMatrix{bad}, InputError);
}
