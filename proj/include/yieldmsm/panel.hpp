#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "yieldmsm/model.hpp"

namespace yieldmsm {

struct PanelObservation {
    double time = 0.0;  // days
    int state = 0;      // 1..K
    std::vector<double> covariates;  // ordered as the owning dataset's covariate_names()
};

struct SubjectRecords {
    std::string id;
    std::vector<PanelObservation> observations;  // strictly increasing in time
};

/// Long-format panel: subjects in first-appearance order, each time-sorted.
class PanelDataset {
public:
    PanelDataset(std::vector<std::string> covariate_names, std::vector<SubjectRecords> subjects);

    const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    const std::vector<SubjectRecords>& subjects() const { return subjects_; }
    std::size_t n_observations() const;
    std::size_t n_intervals() const;
    int max_state() const;

    /// Copy restricted to (and reordered by) the model's covariates. Throws
    /// InputError naming a covariate the panel lacks.
    PanelDataset select_covariates(const ModelSpec& spec) const;
    /// Throws InputError when a state falls outside 1..K for the spec.
    void check_states(const ModelSpec& spec) const;

    /// Observation as a named covariate vector.
    CovariateVector covariates_of(const PanelObservation& obs) const;

private:
    std::vector<std::string> covariate_names_;
    std::vector<SubjectRecords> subjects_;
};

/// Reads `subject_id,time,state,<covariates...>`. Rows of one subject may be
/// interleaved with others; they are stably grouped and time-sorted, and
/// duplicate times are rejected.
PanelDataset read_panel_csv(std::istream& in);
PanelDataset read_panel_csv_file(const std::string& path);

/// Writes the same layout with shortest round-trip number formatting, so a
/// read/write cycle reproduces the file byte for byte.
void write_panel_csv(std::ostream& out, const PanelDataset& data);
void write_panel_csv_file(const std::string& path, const PanelDataset& data);

}  // namespace yieldmsm
