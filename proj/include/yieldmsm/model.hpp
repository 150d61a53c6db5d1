#pragma once

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace yieldmsm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// States are numbered 1..K everywhere in the public API (data files, config,
// transition names); matrices are indexed 0..K-1.

class StateSpace {
public:
    explicit StateSpace(std::vector<std::string> labels);

    int size() const { return static_cast<int>(labels_.size()); }
    const std::string& label(int state) const;
    const std::vector<std::string>& labels() const { return labels_; }
    bool contains(int state) const { return state >= 1 && state <= size(); }

    friend bool operator==(const StateSpace&, const StateSpace&) = default;

private:
    std::vector<std::string> labels_;
};

struct Transition {
    int from = 0;
    int to = 0;

    /// "r->s"
    std::string name() const;
    /// Parses "r->s" (whitespace around the arrow allowed). Rejects r == s.
    static Transition parse(std::string_view text);

    friend auto operator<=>(const Transition&, const Transition&) = default;
};

class TransitionStructure {
public:
    TransitionStructure(std::vector<Transition> allowed, int n_states);

    const std::vector<Transition>& allowed() const { return allowed_; }
    std::size_t size() const { return allowed_.size(); }
    int n_states() const { return n_states_; }
    bool allows(int from, int to) const { return index_of(from, to).has_value(); }
    std::optional<std::size_t> index_of(int from, int to) const;

    /// True when every state can reach every other state through allowed moves.
    bool strongly_connected() const;
    /// reachable(r, s): s can be reached from r in zero or more allowed moves.
    std::vector<std::vector<bool>> reachability() const;

    friend bool operator==(const TransitionStructure&, const TransitionStructure&) = default;

private:
    std::vector<Transition> allowed_;
    int n_states_;
};

class ModelSpec {
public:
    ModelSpec(StateSpace states, TransitionStructure transitions,
              std::vector<std::string> covariate_names);

    /// Three yield states with 1<->3 disallowed.
    static ModelSpec three_state_constrained(std::vector<std::string> covariate_names);

    const StateSpace& states() const { return states_; }
    const TransitionStructure& transitions() const { return transitions_; }
    const std::vector<std::string>& covariate_names() const { return covariates_; }

    int n_states() const { return states_.size(); }
    std::size_t n_transitions() const { return transitions_.size(); }
    std::size_t n_covariates() const { return covariates_.size(); }
    /// |allowed| * (1 + p)
    std::size_t n_parameters() const { return n_transitions() * (1 + n_covariates()); }
    std::optional<std::size_t> covariate_index(std::string_view name) const;

    /// Names in parameter order: "q⁰(r->s)" then "beta(r->s, cov)" per transition.
    std::vector<std::string> parameter_names() const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;

private:
    StateSpace states_;
    TransitionStructure transitions_;
    std::vector<std::string> covariates_;
};

/// Named covariate values, ordered as in the ModelSpec they were built for.
class CovariateVector {
public:
    CovariateVector() = default;
    CovariateVector(std::vector<std::string> names, std::vector<double> values);

    static CovariateVector zeros(const ModelSpec& spec);

    const std::vector<std::string>& names() const { return names_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

    /// Value for a name; throws InputError when absent.
    double at(std::string_view name) const;
    /// Copy with one entry replaced (or shifted when `add` is true).
    CovariateVector with(std::string_view name, double value, bool add = false) const;

    /// Values reordered to the model's covariate list. Throws InputError naming
    /// the first missing covariate; extra names are an error too.
    std::vector<double> aligned_to(const ModelSpec& spec) const;

    friend bool operator==(const CovariateVector&, const CovariateVector&) = default;

private:
    std::vector<std::string> names_;
    std::vector<double> values_;
};

/// Flat parameter vector laid out per allowed transition as
/// [log q⁰_rs, beta_rs(1..p)].
class ParameterSet {
public:
    ParameterSet(const ModelSpec& spec, std::vector<double> values);

    static ParameterSet zeros(const ModelSpec& spec);
    /// Baselines on the rate scale (day⁻¹), betas per transition (may be empty
    /// to mean all zero).
    static ParameterSet from_rates(const ModelSpec& spec, const std::vector<double>& baselines,
                                   const std::vector<std::vector<double>>& betas = {});

    std::size_t size() const { return values_.size(); }
    std::size_t n_transitions() const { return n_transitions_; }
    std::size_t n_covariates() const { return n_covariates_; }

    double log_baseline(std::size_t transition) const;
    double baseline(std::size_t transition) const;
    double beta(std::size_t transition, std::size_t covariate) const;
    std::span<const double> betas(std::size_t transition) const;

    std::span<const double> values() const { return values_; }
    Vector as_vector() const;
    static std::size_t log_baseline_offset(std::size_t transition, std::size_t n_covariates) {
        return transition * (1 + n_covariates);
    }

    friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

private:
    std::size_t n_transitions_ = 0;
    std::size_t n_covariates_ = 0;
    std::vector<double> values_;
};

/// K×K intensity matrix (day⁻¹) with non-negative off-diagonals and zero row sums.
class GeneratorMatrix {
public:
    /// Validates the generator invariants; throws InputError otherwise.
    explicit GeneratorMatrix(Matrix q);

    const Matrix& matrix() const { return q_; }
    int size() const { return static_cast<int>(q_.rows()); }
    double operator()(int row, int col) const { return q_(row, col); }
    /// Largest |q_rr|.
    double max_exit_rate() const;

private:
    Matrix q_;
};

/// q_rs(z) = exp(log q⁰_rs + beta_rs·z) on allowed pairs, 0 elsewhere, diagonal
/// equal to the negative row sum.
GeneratorMatrix assemble_generator(const ParameterSet& theta, const CovariateVector& z,
                                   const ModelSpec& spec);
/// Same, with covariate values already in spec order.
GeneratorMatrix assemble_generator(const ParameterSet& theta, std::span<const double> z,
                                   const ModelSpec& spec);

/// Expected residence time (-q_rr)⁻¹ in days for 1-based state r; +infinity
/// when the state is absorbing under the current intensities.
double sojourn_time(const GeneratorMatrix& q, int state);

/// Jump distribution out of 1-based state r: entry s-1 holds q_rs/(-q_rr),
/// entry r-1 is 0. Throws NumericalError for an absorbing state.
std::vector<double> next_state_distribution(const GeneratorMatrix& q, int state);

}  // namespace yieldmsm
