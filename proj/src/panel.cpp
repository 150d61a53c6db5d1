#include "yieldmsm/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "yieldmsm/csv.hpp"
#include "yieldmsm/error.hpp"

namespace yieldmsm {

PanelDataset::PanelDataset(std::vector<std::string> covariate_names,
                           std::vector<SubjectRecords> subjects)
    : covariate_names_(std::move(covariate_names)), subjects_(std::move(subjects)) {
    std::set<std::string> names;
    for (const auto& c : covariate_names_) {
        if (!names.insert(c).second) throw InputError("duplicate covariate column '" + c + "'");
    }
    std::set<std::string> ids;
    for (const auto& subject : subjects_) {
        if (!ids.insert(subject.id).second) {
            throw InputError("subject '" + subject.id + "' appears twice");
        }
        if (subject.observations.empty()) {
            throw InputError("subject '" + subject.id + "' has no observations");
        }
        for (std::size_t i = 0; i < subject.observations.size(); ++i) {
            const auto& obs = subject.observations[i];
            if (!std::isfinite(obs.time)) {
                throw InputError("subject '" + subject.id + "' has a non-finite time");
            }
            if (i > 0 && !(obs.time > subject.observations[i - 1].time)) {
                throw InputError("subject '" + subject.id + "': times must be strictly increasing");
            }
            if (obs.state < 1) {
                throw InputError("subject '" + subject.id + "': state " + std::to_string(obs.state) +
                                 " out of range");
            }
            if (obs.covariates.size() != covariate_names_.size()) {
                throw InputError("subject '" + subject.id + "': covariate count mismatch");
            }
            for (std::size_t j = 0; j < obs.covariates.size(); ++j) {
                if (!std::isfinite(obs.covariates[j])) {
                    throw InputError("subject '" + subject.id + "': covariate '" +
                                     covariate_names_[j] + "' is not finite");
                }
            }
        }
    }
}

std::size_t PanelDataset::n_observations() const {
    std::size_t n = 0;
    for (const auto& s : subjects_) n += s.observations.size();
    return n;
}

std::size_t PanelDataset::n_intervals() const {
    std::size_t n = 0;
    for (const auto& s : subjects_) n += s.observations.size() - 1;
    return n;
}

int PanelDataset::max_state() const {
    int m = 0;
    for (const auto& s : subjects_)
        for (const auto& o : s.observations) m = std::max(m, o.state);
    return m;
}

PanelDataset PanelDataset::select_covariates(const ModelSpec& spec) const {
    if (covariate_names_ == spec.covariate_names()) return *this;
    std::vector<std::size_t> source;
    for (const auto& name : spec.covariate_names()) {
        auto it = std::find(covariate_names_.begin(), covariate_names_.end(), name);
        if (it == covariate_names_.end()) {
            throw InputError("panel has no column for covariate '" + name + "'");
        }
        source.push_back(static_cast<std::size_t>(it - covariate_names_.begin()));
    }
    auto subjects = subjects_;
    for (auto& s : subjects) {
        for (auto& o : s.observations) {
            std::vector<double> z(source.size());
            for (std::size_t j = 0; j < source.size(); ++j) z[j] = o.covariates[source[j]];
            o.covariates = std::move(z);
        }
    }
    return PanelDataset(spec.covariate_names(), std::move(subjects));
}

void PanelDataset::check_states(const ModelSpec& spec) const {
    for (const auto& s : subjects_)
        for (const auto& o : s.observations)
            if (!spec.states().contains(o.state)) {
                throw InputError("subject '" + s.id + "' at time " + csv::format_exact(o.time) +
                                 ": state " + std::to_string(o.state) + " outside 1.." +
                                 std::to_string(spec.n_states()));
            }
}

CovariateVector PanelDataset::covariates_of(const PanelObservation& obs) const {
    return CovariateVector(covariate_names_, obs.covariates);
}

PanelDataset read_panel_csv(std::istream& in) {
    const auto table = csv::read(in);
    if (table.header.size() < 3 || table.header[0] != "subject_id" || table.header[1] != "time" ||
        table.header[2] != "state") {
        throw InputError("panel CSV header must start with subject_id,time,state");
    }
    std::vector<std::string> covariates(table.header.begin() + 3, table.header.end());

    std::vector<SubjectRecords> subjects;
    std::map<std::string, std::size_t> index;
    for (const auto& row : table.rows) {
        const auto& id = row.fields[0];
        if (id.empty()) throw InputError("line " + std::to_string(row.line) + ": empty subject_id");
        auto [it, inserted] = index.try_emplace(id, subjects.size());
        if (inserted) subjects.push_back(SubjectRecords{id, {}});
        PanelObservation obs;
        obs.time = csv::parse_double(row.fields[1], row, "time");
        obs.state = static_cast<int>(csv::parse_integer(row.fields[2], row, "state"));
        if (obs.state < 1) {
            throw InputError("line " + std::to_string(row.line) + ": state must be >= 1");
        }
        for (std::size_t j = 0; j < covariates.size(); ++j) {
            obs.covariates.push_back(csv::parse_double(row.fields[3 + j], row, covariates[j]));
        }
        subjects[it->second].observations.push_back(std::move(obs));
    }
    for (auto& s : subjects) {
        std::stable_sort(s.observations.begin(), s.observations.end(),
                         [](const auto& a, const auto& b) { return a.time < b.time; });
        for (std::size_t i = 1; i < s.observations.size(); ++i) {
            if (s.observations[i].time == s.observations[i - 1].time) {
                throw InputError("subject '" + s.id + "' has two observations at time " +
                                 csv::format_exact(s.observations[i].time));
            }
        }
    }
    return PanelDataset(std::move(covariates), std::move(subjects));
}

PanelDataset read_panel_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open panel file '" + path + "'");
    try {
        return read_panel_csv(in);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_panel_csv(std::ostream& out, const PanelDataset& data) {
    out << "subject_id,time,state";
    for (const auto& c : data.covariate_names()) out << ',' << csv::escape(c);
    out << '\n';
    for (const auto& s : data.subjects()) {
        for (const auto& o : s.observations) {
            out << csv::escape(s.id) << ',' << csv::format_exact(o.time) << ',' << o.state;
            for (double z : o.covariates) out << ',' << csv::format_exact(z);
            out << '\n';
        }
    }
}

void write_panel_csv_file(const std::string& path, const PanelDataset& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write panel file '" + path + "'");
    write_panel_csv(out, data);
}

}  // namespace yieldmsm
