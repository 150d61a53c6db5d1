#include <doctest.h>

#include <cmath>

#include "test_util.hpp"
#include "yieldmsm/error.hpp"
#include "yieldmsm/inference.hpp"

using namespace yieldmsm;

namespace {

// Pooled baselines with the published RH 1->2 and PAR 2->3 hazard ratios.
FitResult pooled_fit(const ModelSpec& spec, std::optional<Matrix> covariance = std::nullopt) {
    FitResult f{
        .algorithm = Algorithm::bfgs,
        .theta_hat = ParameterSet::from_rates(spec, {0.038, 0.026, 0.040, 0.018},
                                              {{std::log(5.10), 0.0}, {0.0, 0.0}, {0.0, std::log(2.78)}, {0.0, 0.0}}),
    };
    f.converged = true;
    f.n_parameters = static_cast<int>(spec.n_parameters());
    f.boundary_flags = {false, false, false, false};
    f.covariance = std::move(covariance);
    return f;
}

}  // namespace

TEST_CASE("hazard ratio for a null effect") {
    const auto e = make_hazard_ratio({1, 2}, "RH", 0.0, 0.1, false);
    CHECK(e.hr == 1.0);
    CHECK(*e.ci_low == doctest::Approx(0.822).epsilon(1e-3));
    CHECK(*e.ci_high == doctest::Approx(1.217).epsilon(1e-3));
    CHECK_FALSE(e.unstable);
}

TEST_CASE("hazard ratio from the published RH row") {
    const double beta = std::log(5.10);
    const auto e = make_hazard_ratio({1, 2}, "RH", beta, 0.354, false);
    CHECK(e.hr == std::exp(beta));
    CHECK(std::abs(*e.ci_low - 2.55) <= 0.02);
    CHECK(std::abs(*e.ci_high - 10.21) <= 0.02);
    CHECK(std::abs(std::log(*e.ci_high / e.hr) - std::log(e.hr / *e.ci_low)) < 1e-9);
}

TEST_CASE("missing standard errors mark entries unstable") {
    const auto e = make_hazard_ratio({2, 3}, "PAR", 0.4, std::nullopt, false);
    CHECK(e.hr == std::exp(0.4));
    CHECK_FALSE(e.ci_low.has_value());
    CHECK(e.unstable);
}

TEST_CASE("hazard ratio table") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    Matrix cov = Matrix::Identity(12, 12) * 0.04;
    auto f = pooled_fit(spec, cov);
    f.boundary_flags = {false, false, false, true};
    const auto table = hazard_ratios(f, spec);
    REQUIRE(table.size() == 8);
    CHECK(table[0].transition.name() == "1->2");
    CHECK(table[0].covariate == "RH");
    CHECK(table[1].covariate == "PAR");
    CHECK(table[7].transition.name() == "3->2");
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto k = i / 2;
        const auto j = i % 2;
        CHECK(table[i].hr == std::exp(f.theta_hat.beta(k, j)));
        REQUIRE(table[i].ci_low.has_value());
        CHECK(*table[i].ci_low <= table[i].hr);
        CHECK(table[i].hr <= *table[i].ci_high);
        CHECK(std::abs(*table[i].ci_high / table[i].hr - std::exp(1.96 * 0.2)) < 1e-12);
    }
    CHECK_FALSE(table[0].unstable);
    CHECK(table[6].unstable);
    CHECK(table[7].unstable);

    f.converged = false;
    for (const auto& e : hazard_ratios(f, spec)) CHECK(e.unstable);

    const auto no_cov = hazard_ratios(pooled_fit(spec), spec);
    for (const auto& e : no_cov) {
        CHECK(e.unstable);
        CHECK_FALSE(e.ci_high.has_value());
    }
}

TEST_CASE("predict_matrix") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto f = pooled_fit(spec);
    const auto z0 = CovariateVector::zeros(spec);
    CHECK(predict_matrix(f, spec, z0, 0.0).probabilities.matrix() == Matrix::Identity(3, 3));

    const auto rh = z0.with("RH", 1.0);
    const auto base = predict_matrix(f, spec, z0, 30.0);
    const auto up = predict_matrix(f, spec, rh, 30.0);
    CHECK(up.setting == rh);
    CHECK(up.probabilities(0, 1) + up.probabilities(0, 2) > base.probabilities(0, 1) + base.probabilities(0, 2));

    const auto spec0 = ModelSpec::three_state_constrained({});
    FitResult gh3{.algorithm = Algorithm::bfgs,
                  .theta_hat = ParameterSet::from_rates(spec0, {0.005, 0.021, 0.022, 1e-300})};
    const auto p = predict_matrix(gh3, spec0, CovariateVector::zeros(spec0), 30.0);
    CHECK(std::abs(p.probabilities(0, 0) - 0.890) < 1e-3);
    CHECK(std::abs(p.probabilities(0, 1) - 0.078) < 1e-3);
    CHECK(std::abs(p.probabilities(0, 2) - 0.032) < 1e-3);
    CHECK(std::abs(p.probabilities(0, 0) - 0.885) <= 0.01);
    CHECK(std::abs(p.probabilities(0, 1) - 0.081) <= 0.01);
    CHECK(std::abs(p.probabilities(0, 2) - 0.034) <= 0.01);
}

TEST_CASE("forecast semigroup at a fixed setting") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto f = pooled_fit(spec);
    const auto z = CovariateVector(spec.covariate_names(), {0.3, -1.2});
    for (double s : {1.0, 7.5, 30.0}) {
        for (double t : {0.5, 12.0, 45.0}) {
            const Matrix lhs = predict_matrix(f, spec, z, s + t).probabilities.matrix();
            const Matrix rhs = predict_matrix(f, spec, z, s).probabilities.matrix() *
                               predict_matrix(f, spec, z, t).probabilities.matrix();
            CHECK(test::max_abs_diff(lhs, rhs) < 1e-9);
        }
    }
}

TEST_CASE("scenario comparison") {
    const auto spec = ModelSpec::three_state_constrained({"RH", "PAR"});
    const auto f = pooled_fit(spec);
    const auto z0 = CovariateVector::zeros(spec);

    const auto same = scenario_compare(f, spec, z0, z0, 30.0);
    CHECK(same.delta == Matrix::Zero(3, 3));
    for (double r : same.sojourn_ratio) CHECK(r == 1.0);

    const auto rh = scenario_compare(f, spec, z0, z0.with("RH", 1.0), 30.0);
    CHECK(rh.sojourn_base[0] == doctest::Approx(26.3).epsilon(2e-3));
    CHECK(rh.sojourn_alternative[0] == doctest::Approx(5.2).epsilon(1e-2));
    CHECK(rh.sojourn_ratio[0] == doctest::Approx(1.0 / 5.10).epsilon(1e-12));
    CHECK(std::abs(rh.delta.row(0).sum()) < 1e-12);

    const auto q_par = assemble_generator(f.theta_hat, z0.with("PAR", 1.0), spec);
    CHECK(q_par(1, 2) == doctest::Approx(0.111).epsilon(2e-3));
}

TEST_CASE("sojourn summary with delta-method intervals") {
    const auto spec = ModelSpec::three_state_constrained({"RH"});
    Matrix cov = Matrix::Zero(8, 8);
    // log-baseline block: transitions 2->1 (index 2) and 2->3 (index 4) correlated.
    cov(0, 0) = 0.04;
    cov(2, 2) = 0.09;
    cov(4, 4) = 0.16;
    cov(2, 4) = cov(4, 2) = 0.03;
    cov(6, 6) = 0.01;
    FitResult f{.algorithm = Algorithm::bfgs,
                .theta_hat = ParameterSet::from_rates(spec, {0.038, 0.021, 0.022, 0.05}, {{0.2}, {0.1}, {-0.4}, {0.3}})};
    f.covariance = cov;
    const auto s = sojourn_summary(f, spec);
    REQUIRE(s.size() == 3);
    CHECK(s[1].days == doctest::Approx(1.0 / 0.043).epsilon(1e-12));

    // Oracle: numerical gradient of log sojourn in the two log-baselines.
    auto log_sojourn = [](double a, double b) { return -std::log(std::exp(a) + std::exp(b)); };
    const double a = std::log(0.021), b = std::log(0.022), h = 1e-6;
    const double ga = (log_sojourn(a + h, b) - log_sojourn(a - h, b)) / (2 * h);
    const double gb = (log_sojourn(a, b + h) - log_sojourn(a, b - h)) / (2 * h);
    const double se = std::sqrt(ga * ga * 0.09 + gb * gb * 0.16 + 2 * ga * gb * 0.03);
    CHECK(*s[1].ci_low == doctest::Approx(s[1].days * std::exp(-1.96 * se)).epsilon(1e-8));
    CHECK(*s[1].ci_high == doctest::Approx(s[1].days * std::exp(1.96 * se)).epsilon(1e-8));
    CHECK(*s[0].ci_high == doctest::Approx(s[0].days * std::exp(1.96 * 0.2)).epsilon(1e-12));
}
