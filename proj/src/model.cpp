#include "yieldmsm/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "yieldmsm/error.hpp"

namespace yieldmsm {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

int parse_state_number(std::string_view s, std::string_view whole) {
    s = trim(s);
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        throw InputError("malformed transition '" + std::string(whole) + "': expected \"r->s\"");
    }
    return value;
}

}  // namespace

// ---------------------------------------------------------------- StateSpace

StateSpace::StateSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.size() < 2) throw InputError("state space needs at least 2 states");
    std::set<std::string> seen;
    for (const auto& l : labels_) {
        if (!seen.insert(l).second) throw InputError("duplicate state label '" + l + "'");
    }
}

const std::string& StateSpace::label(int state) const {
    if (!contains(state)) throw InputError("state " + std::to_string(state) + " out of range");
    return labels_[static_cast<std::size_t>(state - 1)];
}

// ---------------------------------------------------------------- Transition

std::string Transition::name() const { return std::to_string(from) + "->" + std::to_string(to); }

Transition Transition::parse(std::string_view text) {
    const auto arrow = text.find("->");
    if (arrow == std::string_view::npos) {
        throw InputError("malformed transition '" + std::string(text) + "': expected \"r->s\"");
    }
    Transition t{parse_state_number(text.substr(0, arrow), text),
                 parse_state_number(text.substr(arrow + 2), text)};
    if (t.from == t.to) {
        throw InputError("self-transition '" + std::string(text) + "' is not allowed");
    }
    return t;
}

// ------------------------------------------------------- TransitionStructure

TransitionStructure::TransitionStructure(std::vector<Transition> allowed, int n_states)
    : allowed_(std::move(allowed)), n_states_(n_states) {
    if (allowed_.empty()) throw InputError("transition structure has no allowed transitions");
    std::set<Transition> seen;
    for (const auto& t : allowed_) {
        if (t.from == t.to) throw InputError("self-transition " + t.name() + " is not allowed");
        if (t.from < 1 || t.from > n_states || t.to < 1 || t.to > n_states) {
            throw InputError("transition " + t.name() + " refers to a state outside 1.." +
                             std::to_string(n_states));
        }
        if (!seen.insert(t).second) throw InputError("duplicate transition " + t.name());
    }
}

std::optional<std::size_t> TransitionStructure::index_of(int from, int to) const {
    for (std::size_t k = 0; k < allowed_.size(); ++k) {
        if (allowed_[k].from == from && allowed_[k].to == to) return k;
    }
    return std::nullopt;
}

std::vector<std::vector<bool>> TransitionStructure::reachability() const {
    const auto n = static_cast<std::size_t>(n_states_);
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) reach[i][i] = true;
    for (const auto& t : allowed_) reach[t.from - 1][t.to - 1] = true;
    // Warshall closure.
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            if (reach[i][k])
                for (std::size_t j = 0; j < n; ++j)
                    if (reach[k][j]) reach[i][j] = true;
    return reach;
}

bool TransitionStructure::strongly_connected() const {
    const auto reach = reachability();
    for (const auto& row : reach)
        for (bool b : row)
            if (!b) return false;
    return true;
}

// ----------------------------------------------------------------- ModelSpec

ModelSpec::ModelSpec(StateSpace states, TransitionStructure transitions,
                     std::vector<std::string> covariate_names)
    : states_(std::move(states)),
      transitions_(std::move(transitions)),
      covariates_(std::move(covariate_names)) {
    if (transitions_.n_states() != states_.size()) {
        throw InputError("transition structure and state space disagree on the number of states");
    }
    std::set<std::string> seen;
    for (const auto& c : covariates_) {
        if (c.empty()) throw InputError("empty covariate name");
        if (!seen.insert(c).second) throw InputError("duplicate covariate '" + c + "'");
    }
}

ModelSpec ModelSpec::three_state_constrained(std::vector<std::string> covariate_names) {
    return ModelSpec(StateSpace({"low", "medium", "high"}),
                     TransitionStructure({{1, 2}, {2, 1}, {2, 3}, {3, 2}}, 3),
                     std::move(covariate_names));
}

std::optional<std::size_t> ModelSpec::covariate_index(std::string_view name) const {
    for (std::size_t j = 0; j < covariates_.size(); ++j) {
        if (covariates_[j] == name) return j;
    }
    return std::nullopt;
}

std::vector<std::string> ModelSpec::parameter_names() const {
    std::vector<std::string> names;
    names.reserve(n_parameters());
    for (const auto& t : transitions_.allowed()) {
        names.push_back("q⁰(" + t.name() + ")");
        for (const auto& c : covariates_) names.push_back("beta(" + t.name() + ", " + c + ")");
    }
    return names;
}

// ----------------------------------------------------------- CovariateVector

CovariateVector::CovariateVector(std::vector<std::string> names, std::vector<double> values)
    : names_(std::move(names)), values_(std::move(values)) {
    if (names_.size() != values_.size()) {
        throw InputError("covariate vector has " + std::to_string(names_.size()) + " names but " +
                         std::to_string(values_.size()) + " values");
    }
    std::set<std::string> seen;
    for (std::size_t j = 0; j < names_.size(); ++j) {
        if (!seen.insert(names_[j]).second) {
            throw InputError("duplicate covariate '" + names_[j] + "'");
        }
        if (!std::isfinite(values_[j])) {
            throw InputError("covariate '" + names_[j] + "' is not finite");
        }
    }
}

CovariateVector CovariateVector::zeros(const ModelSpec& spec) {
    return CovariateVector(spec.covariate_names(), std::vector<double>(spec.n_covariates(), 0.0));
}

double CovariateVector::at(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j) {
        if (names_[j] == name) return values_[j];
    }
    throw InputError("missing covariate '" + std::string(name) + "'");
}

CovariateVector CovariateVector::with(std::string_view name, double value, bool add) const {
    for (std::size_t j = 0; j < names_.size(); ++j) {
        if (names_[j] == name) {
            auto values = values_;
            values[j] = add ? values[j] + value : value;
            return CovariateVector(names_, std::move(values));
        }
    }
    throw InputError("unknown covariate '" + std::string(name) + "'");
}

std::vector<double> CovariateVector::aligned_to(const ModelSpec& spec) const {
    std::vector<double> out(spec.n_covariates());
    for (std::size_t j = 0; j < spec.n_covariates(); ++j) {
        out[j] = at(spec.covariate_names()[j]);
    }
    if (names_.size() != spec.n_covariates()) {
        for (const auto& n : names_) {
            if (!spec.covariate_index(n)) {
                throw InputError("covariate '" + n + "' is not part of the model");
            }
        }
    }
    return out;
}

// -------------------------------------------------------------- ParameterSet

ParameterSet::ParameterSet(const ModelSpec& spec, std::vector<double> values)
    : n_transitions_(spec.n_transitions()),
      n_covariates_(spec.n_covariates()),
      values_(std::move(values)) {
    if (values_.size() != spec.n_parameters()) {
        throw InputError("parameter set has " + std::to_string(values_.size()) +
                         " entries, model needs " + std::to_string(spec.n_parameters()));
    }
    const auto names = spec.parameter_names();
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw InputError("parameter " + names[i] + " is not finite");
        }
    }
}

ParameterSet ParameterSet::zeros(const ModelSpec& spec) {
    return ParameterSet(spec, std::vector<double>(spec.n_parameters(), 0.0));
}

ParameterSet ParameterSet::from_rates(const ModelSpec& spec, const std::vector<double>& baselines,
                                      const std::vector<std::vector<double>>& betas) {
    if (baselines.size() != spec.n_transitions()) {
        throw InputError("expected " + std::to_string(spec.n_transitions()) + " baselines");
    }
    if (!betas.empty() && betas.size() != spec.n_transitions()) {
        throw InputError("expected " + std::to_string(spec.n_transitions()) + " beta rows");
    }
    const std::size_t p = spec.n_covariates();
    std::vector<double> values(spec.n_parameters(), 0.0);
    for (std::size_t k = 0; k < baselines.size(); ++k) {
        if (!(baselines[k] > 0.0)) {
            throw InputError("baseline for " + spec.transitions().allowed()[k].name() +
                             " must be positive");
        }
        values[log_baseline_offset(k, p)] = std::log(baselines[k]);
        if (!betas.empty()) {
            if (betas[k].size() != p) {
                throw InputError("beta row for " + spec.transitions().allowed()[k].name() +
                                 " needs " + std::to_string(p) + " entries");
            }
            std::copy(betas[k].begin(), betas[k].end(),
                      values.begin() + static_cast<std::ptrdiff_t>(log_baseline_offset(k, p) + 1));
        }
    }
    return ParameterSet(spec, std::move(values));
}

double ParameterSet::log_baseline(std::size_t transition) const {
    return values_.at(log_baseline_offset(transition, n_covariates_));
}

double ParameterSet::baseline(std::size_t transition) const {
    return std::exp(log_baseline(transition));
}

double ParameterSet::beta(std::size_t transition, std::size_t covariate) const {
    return betas(transition)[covariate];
}

std::span<const double> ParameterSet::betas(std::size_t transition) const {
    if (transition >= n_transitions_) throw InputError("transition index out of range");
    return std::span<const double>(values_).subspan(
        log_baseline_offset(transition, n_covariates_) + 1, n_covariates_);
}

Vector ParameterSet::as_vector() const {
    return Eigen::Map<const Vector>(values_.data(), static_cast<Eigen::Index>(values_.size()));
}

// ----------------------------------------------------------- GeneratorMatrix

GeneratorMatrix::GeneratorMatrix(Matrix q) : q_(std::move(q)) {
    if (q_.rows() != q_.cols() || q_.rows() < 2) {
        throw InputError("generator must be a square matrix with at least 2 states");
    }
    if (!q_.allFinite()) throw InputError("generator has non-finite entries");
    const double scale = std::max(1.0, q_.cwiseAbs().maxCoeff());
    for (Eigen::Index r = 0; r < q_.rows(); ++r) {
        for (Eigen::Index s = 0; s < q_.cols(); ++s) {
            if (r != s && q_(r, s) < 0.0) {
                throw InputError("generator entry (" + std::to_string(r + 1) + "," +
                                 std::to_string(s + 1) + ") is negative");
            }
        }
        if (std::abs(q_.row(r).sum()) > 1e-12 * scale) {
            throw InputError("generator row " + std::to_string(r + 1) + " does not sum to zero");
        }
    }
}

double GeneratorMatrix::max_exit_rate() const { return (-q_.diagonal()).maxCoeff(); }

GeneratorMatrix assemble_generator(const ParameterSet& theta, std::span<const double> z,
                                   const ModelSpec& spec) {
    if (theta.n_transitions() != spec.n_transitions() ||
        theta.n_covariates() != spec.n_covariates()) {
        throw InputError("parameter set does not match the model dimensions");
    }
    if (z.size() != spec.n_covariates()) {
        throw InputError("expected " + std::to_string(spec.n_covariates()) +
                         " covariate values, got " + std::to_string(z.size()));
    }
    const int k_states = spec.n_states();
    Matrix q = Matrix::Zero(k_states, k_states);
    const auto& allowed = spec.transitions().allowed();
    for (std::size_t k = 0; k < allowed.size(); ++k) {
        double eta = theta.log_baseline(k);
        const auto beta = theta.betas(k);
        for (std::size_t j = 0; j < z.size(); ++j) {
            if (!std::isfinite(z[j])) {
                throw InputError("covariate '" + spec.covariate_names()[j] + "' is not finite");
            }
            eta += beta[j] * z[j];
        }
        const double rate = std::exp(eta);
        if (!std::isfinite(rate)) {
            throw NumericalError("intensity for " + allowed[k].name() + " overflows (log rate " +
                                 std::to_string(eta) + ")");
        }
        q(allowed[k].from - 1, allowed[k].to - 1) = rate;
    }
    for (int r = 0; r < k_states; ++r) {
        double exit = 0.0;
        for (int s = 0; s < k_states; ++s)
            if (s != r) exit += q(r, s);
        q(r, r) = -exit;
    }
    return GeneratorMatrix(std::move(q));
}

GeneratorMatrix assemble_generator(const ParameterSet& theta, const CovariateVector& z,
                                   const ModelSpec& spec) {
    const auto values = z.aligned_to(spec);
    return assemble_generator(theta, std::span<const double>(values), spec);
}

double sojourn_time(const GeneratorMatrix& q, int state) {
    if (state < 1 || state > q.size()) {
        throw InputError("state " + std::to_string(state) + " out of range");
    }
    const double exit = -q(state - 1, state - 1);
    if (exit <= 0.0) return std::numeric_limits<double>::infinity();
    return 1.0 / exit;
}

std::vector<double> next_state_distribution(const GeneratorMatrix& q, int state) {
    if (state < 1 || state > q.size()) {
        throw InputError("state " + std::to_string(state) + " out of range");
    }
    const int r = state - 1;
    const double exit = -q(r, r);
    if (exit <= 0.0) {
        throw NumericalError("state " + std::to_string(state) +
                             " is absorbing; its jump distribution is undefined");
    }
    std::vector<double> probs(static_cast<std::size_t>(q.size()), 0.0);
    for (int s = 0; s < q.size(); ++s) {
        if (s != r) probs[static_cast<std::size_t>(s)] = q(r, s) / exit;
    }
    return probs;
}

}  // namespace yieldmsm
