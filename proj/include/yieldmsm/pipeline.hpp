#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "yieldmsm/model.hpp"
#include "yieldmsm/panel.hpp"

namespace yieldmsm::pipeline {

/// Regular-cadence readings of one variable in one greenhouse; the cadence
/// divides an hour. Slot i covers start_minute + i·cadence; start_minute is a
/// midnight (minutes since epoch).
struct RawSeries {
    std::string greenhouse;
    std::string variable;
    std::int64_t start_minute = 0;
    int cadence_minutes = 15;
    std::vector<std::optional<double>> values;

    int slots_per_day() const { return 1440 / cadence_minutes; }
    std::int64_t first_day() const { return start_minute / 1440; }
    std::size_t n_days() const;
};

struct DailyMean {
    std::int64_t day = 0;          // days since 1970-01-01
    std::optional<double> mean;    // empty when no hour has data
    int hours_present = 0;
    bool partial = false;          // some slot of the day was missing
};

/// Two-stage mean: slots → hourly means → daily mean of the available hours.
std::vector<DailyMean> aggregate_daily(const RawSeries& raw);

struct GapFillResult {
    RawSeries series;
    std::size_t filled = 0;
    std::vector<std::size_t> residual_gaps;  // slot indices still missing
};

/// A missing slot takes the mean of the available original values in the
/// same time-of-day slot at day offsets ±1, ±2, ±3.
GapFillResult gap_fill_neighborhood(const RawSeries& raw);

struct DailyRecord {
    std::string greenhouse;
    std::string line;
    int day = 0;
    std::optional<double> yield_kg;
    std::optional<double> co2_ppm;
    std::optional<double> rh_percent;
    std::optional<double> par_umol;
    std::optional<double> temp_c;
    std::optional<double> water_l_m2;
    std::optional<int> state;

    /// Field by variable name (case-insensitive: yield, co2, rh, par, temp, water).
    std::optional<double>& field(std::string_view variable);
    const std::optional<double>& field(std::string_view variable) const;
};

using DailyRecords = std::vector<DailyRecord>;

/// Canonical display name used for panel columns: CO2, RH, PAR, Temp, Water, yield.
std::string canonical_variable(std::string_view variable);

/// Per greenhouse and variable: (x - mean) / sd with the n-1 denominator,
/// over the present values. Throws InputError for a zero-variance group.
DailyRecords zscore_within_group(DailyRecords table, const std::vector<std::string>& variables);

struct CutPoints {
    double low = 0.0;
    double high = 0.0;

    CutPoints(double low_cut, double high_cut);
};

/// Linear-interpolation quantile at position h = (n-1)p + 1 (1-based).
double quantile_linear(std::span<const double> values, double p);

/// 1/3 and 2/3 quantiles; needs at least three distinct values.
CutPoints tertile_cutpoints(std::span<const double> values);

/// y < low → 1, low ≤ y ≤ high → 2, y > high → 3.
std::vector<int> assign_states(std::span<const double> yields, const CutPoints& cuts);

/// Day d takes the latest (day, value) at or before d; earlier days are empty.
std::vector<std::optional<double>> forward_carry(const std::vector<std::pair<int, double>>& weekly,
                                                 int horizon_days);

/// Pearson correlations of residuals from a centered moving average of width
/// `window`, computed per (greenhouse, line) series and pooled.
Matrix detrended_correlations(const DailyRecords& table, const std::vector<std::string>& variables,
                              int window = 7);

// ------------------------------------------------------------------ I/O

/// Parses "YYYY-MM-DD[THH:MM[:SS]][Z]" into minutes since epoch.
std::int64_t parse_timestamp(std::string_view text);
std::int64_t parse_date_days(std::string_view text);

/// `timestamp,greenhouse,variable,value` (blank value = missing).
std::vector<RawSeries> read_sensor_csv(std::istream& in);

struct HarvestRecord {
    std::string greenhouse;
    std::string line;
    int day = 0;
    double yield_kg = 0.0;
};

/// `greenhouse,line,day,yield_kg`.
std::vector<HarvestRecord> read_harvest_csv(std::istream& in);

// -------------------------------------------------------------- assembly

struct PipelineOptions {
    std::string reference_greenhouse = "GH-3";
    std::optional<std::int64_t> start_day;         // epoch day of study day 0
    std::optional<int> days;                       // study length
    std::vector<std::string> standardize = {"co2", "rh", "par"};
    bool fixed_effects = true;
    std::vector<std::string> screening = {"co2", "rh", "par", "temp", "water"};
    int correlation_window = 7;
};

struct PipelineOutput {
    DailyRecords table;                     // raw-unit climate, yields and states
    CutPoints cuts{0.0, 1.0};
    std::vector<std::string> screening_variables;
    Matrix correlations;
    PanelDataset panel{{}, {}};
    std::vector<std::string> warnings;
};

/// Gap fill → daily aggregation → forward-carried yields → reference-house
/// tertile states → within-house z-scores (+ house indicators) → panel.
PipelineOutput run_pipeline(const std::vector<RawSeries>& sensors,
                            const std::vector<HarvestRecord>& harvest, const PipelineOptions& opts);

/// Copy with times and covariates rounded to `digits` significant digits, as
/// written by the preprocessing step.
PanelDataset round_significant(const PanelDataset& data, int digits = 6);

/// Analysis table as CSV (6 significant digits, missing as empty fields).
void write_daily_table(std::ostream& out, const DailyRecords& table);

}  // namespace yieldmsm::pipeline
