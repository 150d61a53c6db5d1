#include "yieldmsm/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "yieldmsm/csv.hpp"
#include "yieldmsm/error.hpp"

namespace yieldmsm::pipeline {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::string variable_key(std::string_view variable) {
    const auto v = lower(variable);
    if (v == "yield" || v == "yield_kg") return "yield";
    if (v == "co2" || v == "co2_ppm") return "co2";
    if (v == "rh" || v == "rh_percent") return "rh";
    if (v == "par" || v == "par_umol") return "par";
    if (v == "temp" || v == "temp_c" || v == "temperature") return "temp";
    if (v == "water" || v == "water_l_m2") return "water";
    throw InputError("unknown variable '" + std::string(variable) +
                     "' (expected yield, co2, rh, par, temp or water)");
}

int parse_fixed_int(std::string_view text, std::size_t pos, std::size_t len, std::string_view whole) {
    if (pos + len > text.size()) throw InputError("malformed timestamp '" + std::string(whole) + "'");
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, value);
    if (ec != std::errc{} || ptr != text.data() + pos + len) {
        throw InputError("malformed timestamp '" + std::string(whole) + "'");
    }
    return value;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

void check_cadence(const RawSeries& raw) {
    if (raw.cadence_minutes <= 0 || 60 % raw.cadence_minutes != 0) {
        throw InputError("cadence of " + std::to_string(raw.cadence_minutes) +
                         " minutes does not divide an hour");
    }
}

}  // namespace

// ---------------------------------------------------------------- RawSeries

std::size_t RawSeries::n_days() const {
    const auto spd = static_cast<std::size_t>(slots_per_day());
    return (values.size() + spd - 1) / spd;
}

std::vector<DailyMean> aggregate_daily(const RawSeries& raw) {
    if (raw.values.empty()) throw InputError("cannot aggregate an empty series");
    check_cadence(raw);
    const int spd = raw.slots_per_day();
    std::vector<DailyMean> out;
    for (std::size_t d = 0; d < raw.n_days(); ++d) {
        DailyMean day{raw.first_day() + static_cast<std::int64_t>(d), std::nullopt, 0, false};
        std::vector<double> hourly;
        for (int hour = 0; hour < 24; ++hour) {
            std::vector<double> present;
            bool any_slot = false;
            for (int slot = 0; slot < spd; ++slot) {
                const int minute = slot * raw.cadence_minutes;
                if (minute < hour * 60 || minute >= (hour + 1) * 60) continue;
                any_slot = true;
                const auto index = d * static_cast<std::size_t>(spd) + static_cast<std::size_t>(slot);
                if (index < raw.values.size() && raw.values[index]) {
                    present.push_back(*raw.values[index]);
                } else {
                    day.partial = true;
                }
            }
            if (any_slot && !present.empty()) hourly.push_back(mean_of(present));
        }
        day.hours_present = static_cast<int>(hourly.size());
        if (!hourly.empty()) day.mean = mean_of(hourly);
        out.push_back(day);
    }
    return out;
}

GapFillResult gap_fill_neighborhood(const RawSeries& raw) {
    check_cadence(raw);
    GapFillResult result{raw, 0, {}};
    const auto spd = static_cast<std::ptrdiff_t>(raw.slots_per_day());
    const auto n = static_cast<std::ptrdiff_t>(raw.values.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        if (raw.values[static_cast<std::size_t>(i)]) continue;
        double sum = 0.0;
        int count = 0;
        for (int offset : {-3, -2, -1, 1, 2, 3}) {
            const auto j = i + offset * spd;
            if (j < 0 || j >= n) continue;
            if (const auto& v = raw.values[static_cast<std::size_t>(j)]) {
                sum += *v;
                ++count;
            }
        }
        if (count > 0) {
            result.series.values[static_cast<std::size_t>(i)] = sum / count;
            ++result.filled;
        } else {
            result.residual_gaps.push_back(static_cast<std::size_t>(i));
        }
    }
    return result;
}

// -------------------------------------------------------------- DailyRecord

std::optional<double>& DailyRecord::field(std::string_view variable) {
    const auto key = variable_key(variable);
    if (key == "yield") return yield_kg;
    if (key == "co2") return co2_ppm;
    if (key == "rh") return rh_percent;
    if (key == "par") return par_umol;
    if (key == "temp") return temp_c;
    return water_l_m2;
}

const std::optional<double>& DailyRecord::field(std::string_view variable) const {
    return const_cast<DailyRecord*>(this)->field(variable);
}

std::string canonical_variable(std::string_view variable) {
    const auto key = variable_key(variable);
    if (key == "co2") return "CO2";
    if (key == "rh") return "RH";
    if (key == "par") return "PAR";
    if (key == "temp") return "Temp";
    if (key == "water") return "Water";
    return "yield";
}

DailyRecords zscore_within_group(DailyRecords table, const std::vector<std::string>& variables) {
    std::vector<std::string> groups;
    for (const auto& r : table) {
        if (std::find(groups.begin(), groups.end(), r.greenhouse) == groups.end()) {
            groups.push_back(r.greenhouse);
        }
    }
    for (const auto& variable : variables) {
        for (const auto& group : groups) {
            std::vector<double> values;
            for (const auto& r : table) {
                if (r.greenhouse == group && r.field(variable)) values.push_back(*r.field(variable));
            }
            if (values.size() < 2) {
                throw InputError("greenhouse '" + group + "', variable '" + canonical_variable(variable) +
                                 "': need at least two values to standardize");
            }
            const double mean = mean_of(values);
            double ss = 0.0;
            for (double v : values) ss += (v - mean) * (v - mean);
            const double sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
            if (!(sd > 0.0) || sd <= 1e-14 * std::max(1.0, std::abs(mean))) {
                throw InputError("greenhouse '" + group + "', variable '" + canonical_variable(variable) +
                                 "' has zero variance");
            }
            for (auto& r : table) {
                if (r.greenhouse != group) continue;
                auto& f = r.field(variable);
                if (f) f = (*f - mean) / sd;
            }
        }
    }
    return table;
}

// --------------------------------------------------------------- tertiles

CutPoints::CutPoints(double low_cut, double high_cut) : low(low_cut), high(high_cut) {
    if (!std::isfinite(low) || !std::isfinite(high) || !(low < high)) {
        throw InputError("cut-points must satisfy low < high");
    }
}

double quantile_linear(std::span<const double> values, double p) {
    if (values.empty()) throw InputError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InputError("quantile probability must lie in [0,1]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double h = static_cast<double>(sorted.size() - 1) * p + 1.0;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo >= sorted.size()) return sorted.back();
    return sorted[lo - 1] + (h - static_cast<double>(lo)) * (sorted[lo] - sorted[lo - 1]);
}

CutPoints tertile_cutpoints(std::span<const double> values) {
    std::set<double> distinct(values.begin(), values.end());
    if (distinct.size() < 3) {
        throw InputError("tertile cut-points need at least three distinct values");
    }
    return CutPoints(quantile_linear(values, 1.0 / 3.0), quantile_linear(values, 2.0 / 3.0));
}

std::vector<int> assign_states(std::span<const double> yields, const CutPoints& cuts) {
    std::vector<int> states;
    states.reserve(yields.size());
    for (double y : yields) {
        if (!std::isfinite(y) || y < 0.0) {
            throw InputError("yield values must be finite and non-negative");
        }
        states.push_back(y < cuts.low ? 1 : (y > cuts.high ? 3 : 2));
    }
    return states;
}

std::vector<std::optional<double>> forward_carry(const std::vector<std::pair<int, double>>& weekly,
                                                 int horizon_days) {
    if (weekly.empty()) throw InputError("forward carry needs at least one harvest value");
    if (horizon_days < 0) throw InputError("horizon must be non-negative");
    for (std::size_t i = 1; i < weekly.size(); ++i) {
        if (!(weekly[i].first > weekly[i - 1].first)) {
            throw InputError("harvest days must be strictly increasing");
        }
    }
    std::vector<std::optional<double>> daily(static_cast<std::size_t>(horizon_days));
    std::size_t next = 0;
    std::optional<double> current;
    for (int d = 0; d < horizon_days; ++d) {
        while (next < weekly.size() && weekly[next].first <= d) current = weekly[next++].second;
        daily[static_cast<std::size_t>(d)] = current;
    }
    return daily;
}

Matrix detrended_correlations(const DailyRecords& table, const std::vector<std::string>& variables,
                              int window) {
    if (window < 3 || window % 2 == 0) throw InputError("detrending window must be odd and >= 3");
    const auto nv = variables.size();
    const int half = window / 2;

    // Series per (greenhouse, line), ordered by day.
    std::map<std::pair<std::string, std::string>, std::vector<const DailyRecord*>> series;
    for (const auto& r : table) series[{r.greenhouse, r.line}].push_back(&r);

    std::vector<std::vector<double>> residuals(nv);
    bool any_long_enough = false;
    for (auto& [key, rows] : series) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const DailyRecord* a, const DailyRecord* b) { return a->day < b->day; });
        const auto n = static_cast<int>(rows.size());
        if (n <= window) continue;
        any_long_enough = true;
        for (int i = half; i < n - half; ++i) {
            for (std::size_t v = 0; v < nv; ++v) {
                double sum = 0.0;
                bool complete = true;
                for (int k = i - half; k <= i + half && complete; ++k) {
                    const auto& f = rows[static_cast<std::size_t>(k)]->field(variables[v]);
                    if (f) {
                        sum += *f;
                    } else {
                        complete = false;
                    }
                }
                residuals[v].push_back(complete ? *rows[static_cast<std::size_t>(i)]->field(variables[v]) -
                                                      sum / window
                                                : std::nan(""));
            }
        }
    }
    if (!any_long_enough) {
        throw InputError("series are too short for a detrending window of " + std::to_string(window));
    }

    Matrix corr = Matrix::Identity(static_cast<Eigen::Index>(nv), static_cast<Eigen::Index>(nv));
    for (std::size_t a = 0; a < nv; ++a) {
        for (std::size_t b = a + 1; b < nv; ++b) {
            std::vector<double> x, y;
            for (std::size_t i = 0; i < residuals[a].size(); ++i) {
                if (std::isfinite(residuals[a][i]) && std::isfinite(residuals[b][i])) {
                    x.push_back(residuals[a][i]);
                    y.push_back(residuals[b][i]);
                }
            }
            double r = std::nan("");
            if (x.size() >= 2) {
                const double mx = mean_of(x), my = mean_of(y);
                double sxy = 0.0, sxx = 0.0, syy = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) {
                    sxy += (x[i] - mx) * (y[i] - my);
                    sxx += (x[i] - mx) * (x[i] - mx);
                    syy += (y[i] - my) * (y[i] - my);
                }
                if (sxx > 0.0 && syy > 0.0) r = sxy / std::sqrt(sxx * syy);
            }
            corr(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = r;
            corr(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = r;
        }
    }
    return corr;
}

// --------------------------------------------------------------------- I/O

std::int64_t parse_date_days(std::string_view text) {
    using namespace std::chrono;
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        throw InputError("malformed date '" + std::string(text) + "' (expected YYYY-MM-DD)");
    }
    const year_month_day ymd{year{parse_fixed_int(text, 0, 4, text)},
                             month{static_cast<unsigned>(parse_fixed_int(text, 5, 2, text))},
                             day{static_cast<unsigned>(parse_fixed_int(text, 8, 2, text))}};
    if (!ymd.ok()) throw InputError("invalid date '" + std::string(text) + "'");
    return sys_days{ymd}.time_since_epoch().count();
}

std::int64_t parse_timestamp(std::string_view text) {
    std::string_view t = text;
    if (!t.empty() && (t.back() == 'Z' || t.back() == 'z')) t.remove_suffix(1);
    const std::int64_t days = parse_date_days(t.substr(0, std::min<std::size_t>(t.size(), 10)));
    if (t.size() == 10) return days * 1440;
    if (t.size() != 16 && t.size() != 19) {
        throw InputError("malformed timestamp '" + std::string(text) + "'");
    }
    if ((t[10] != 'T' && t[10] != ' ') || t[13] != ':' || (t.size() == 19 && t[16] != ':')) {
        throw InputError("malformed timestamp '" + std::string(text) + "'");
    }
    const int hour = parse_fixed_int(t, 11, 2, text);
    const int minute = parse_fixed_int(t, 14, 2, text);
    const int second = t.size() == 19 ? parse_fixed_int(t, 17, 2, text) : 0;
    if (hour > 23 || minute > 59 || second != 0) {
        throw InputError("timestamp '" + std::string(text) + "' is not on a whole minute");
    }
    return days * 1440 + hour * 60 + minute;
}

std::vector<RawSeries> read_sensor_csv(std::istream& in) {
    const auto table = csv::read(in);
    const auto c_time = table.column("timestamp");
    const auto c_house = table.column("greenhouse");
    const auto c_var = table.column("variable");
    const auto c_value = table.column("value");

    struct Reading {
        std::int64_t minute;
        std::optional<double> value;
        std::size_t line;
    };
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<Reading>> groups;
    for (const auto& row : table.rows) {
        std::int64_t minute = 0;
        try {
            minute = parse_timestamp(row.fields[c_time]);
        } catch (const InputError& e) {
            throw InputError("line " + std::to_string(row.line) + ": " + e.what());
        }
        const std::pair key{row.fields[c_house], canonical_variable(row.fields[c_var])};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        if (!it->second.empty() && minute <= it->second.back().minute) {
            throw InputError("line " + std::to_string(row.line) +
                             ": timestamps must be strictly increasing within greenhouse/variable");
        }
        it->second.push_back({minute, csv::parse_optional_double(row.fields[c_value], row, "value"), row.line});
    }

    std::vector<RawSeries> out;
    for (const auto& key : order) {
        const auto& readings = groups[key];
        std::int64_t cadence = 0;
        for (std::size_t i = 1; i < readings.size(); ++i) {
            cadence = std::gcd(cadence, readings[i].minute - readings[i - 1].minute);
        }
        if (cadence == 0) cadence = 15;
        while (60 % cadence != 0) --cadence;  // fall back to a divisor of the hour
        RawSeries s;
        s.greenhouse = key.first;
        s.variable = key.second;
        s.cadence_minutes = static_cast<int>(cadence);
        s.start_minute = (readings.front().minute / 1440) * 1440;
        const auto spd = static_cast<std::int64_t>(s.slots_per_day());
        const auto last_slot = (readings.back().minute - s.start_minute) / cadence;
        const auto n_slots = ((last_slot / spd) + 1) * spd;
        s.values.assign(static_cast<std::size_t>(n_slots), std::nullopt);
        for (const auto& r : readings) {
            const auto offset = r.minute - s.start_minute;
            if (offset % cadence != 0) {
                throw InputError("line " + std::to_string(r.line) + ": timestamp is off the " +
                                 std::to_string(cadence) + "-minute grid");
            }
            s.values[static_cast<std::size_t>(offset / cadence)] = r.value;
        }
        out.push_back(std::move(s));
    }
    if (out.empty()) throw InputError("sensor file has no readings");
    return out;
}

std::vector<HarvestRecord> read_harvest_csv(std::istream& in) {
    const auto table = csv::read(in);
    const auto c_house = table.column("greenhouse");
    const auto c_line = table.column("line");
    const auto c_day = table.column("day");
    const auto c_yield = table.column("yield_kg");
    std::vector<HarvestRecord> out;
    for (const auto& row : table.rows) {
        HarvestRecord r{row.fields[c_house], row.fields[c_line],
                        static_cast<int>(csv::parse_integer(row.fields[c_day], row, "day")),
                        csv::parse_double(row.fields[c_yield], row, "yield_kg")};
        if (r.yield_kg < 0.0) {
            throw InputError("line " + std::to_string(row.line) + ": negative yield");
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw InputError("harvest file has no records");
    return out;
}

// ---------------------------------------------------------------- assembly

PipelineOutput run_pipeline(const std::vector<RawSeries>& sensors,
                            const std::vector<HarvestRecord>& harvest, const PipelineOptions& opts) {
    if (sensors.empty()) throw InputError("no sensor series");
    PipelineOutput out;

    // Climate: gap fill, then daily means keyed by (greenhouse, variable).
    std::map<std::pair<std::string, std::string>, std::map<std::int64_t, std::optional<double>>> climate;
    std::int64_t first_day = sensors.front().first_day();
    std::int64_t last_day = first_day;
    for (const auto& s : sensors) {
        const auto filled = gap_fill_neighborhood(s);
        if (!filled.residual_gaps.empty()) {
            out.warnings.push_back(s.greenhouse + "/" + s.variable + ": " +
                                   std::to_string(filled.residual_gaps.size()) +
                                   " slots remain missing after gap filling");
        }
        auto& daily = climate[{s.greenhouse, variable_key(s.variable)}];
        for (const auto& d : aggregate_daily(filled.series)) {
            daily[d.day] = d.mean;
            if (d.partial && d.mean) {
                out.warnings.push_back(s.greenhouse + "/" + s.variable + ": day " +
                                       std::to_string(d.day) + " averaged over available slots");
            }
        }
        first_day = std::min(first_day, s.first_day());
        last_day = std::max(last_day, s.first_day() + static_cast<std::int64_t>(s.n_days()) - 1);
    }
    const std::int64_t start = opts.start_day.value_or(first_day);
    const int n_days = opts.days.value_or(static_cast<int>(last_day - start + 1));
    if (n_days <= 0) throw InputError("study period is empty");

    // Yields per subject.
    std::vector<std::pair<std::string, std::string>> subjects;
    std::map<std::pair<std::string, std::string>, std::vector<std::pair<int, double>>> weekly;
    for (const auto& h : harvest) {
        const std::pair key{h.greenhouse, h.line};
        auto [it, inserted] = weekly.try_emplace(key);
        if (inserted) subjects.push_back(key);
        it->second.emplace_back(h.day, h.yield_kg);
    }

    const std::vector<std::string> climate_vars = {"co2", "rh", "par", "temp", "water"};
    for (const auto& key : subjects) {
        auto& entries = weekly[key];
        std::stable_sort(entries.begin(), entries.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        const auto yields = forward_carry(entries, n_days);
        for (int d = 0; d < n_days; ++d) {
            DailyRecord rec;
            rec.greenhouse = key.first;
            rec.line = key.second;
            rec.day = d;
            rec.yield_kg = yields[static_cast<std::size_t>(d)];
            for (const auto& v : climate_vars) {
                auto it = climate.find({key.first, v});
                if (it == climate.end()) continue;
                auto day_it = it->second.find(start + d);
                if (day_it != it->second.end()) rec.field(v) = day_it->second;
            }
            out.table.push_back(std::move(rec));
        }
    }

    // States from the reference house tertiles.
    std::vector<double> reference;
    for (const auto& r : out.table) {
        if (r.greenhouse == opts.reference_greenhouse && r.yield_kg) reference.push_back(*r.yield_kg);
    }
    if (reference.empty()) {
        throw InputError("reference greenhouse '" + opts.reference_greenhouse + "' has no yields");
    }
    out.cuts = tertile_cutpoints(reference);
    for (auto& r : out.table) {
        if (r.yield_kg) {
            const double y = *r.yield_kg;
            r.state = assign_states(std::span<const double>(&y, 1), out.cuts).front();
        }
    }

    // Screening on raw-unit anomalies, skipping variables absent everywhere.
    for (const auto& v : opts.screening) {
        const bool present = std::any_of(out.table.begin(), out.table.end(),
                                         [&](const DailyRecord& r) { return r.field(v).has_value(); });
        if (present) {
            out.screening_variables.push_back(canonical_variable(v));
        } else {
            out.warnings.push_back("screening variable '" + v + "' has no data");
        }
    }
    if (out.screening_variables.size() >= 2) {
        out.correlations = detrended_correlations(out.table, out.screening_variables, opts.correlation_window);
    }

    // Standardized covariates and house indicators.
    const auto standardized = zscore_within_group(out.table, opts.standardize);
    std::vector<std::string> covariates;
    for (const auto& v : opts.standardize) covariates.push_back(canonical_variable(v));
    std::vector<std::string> houses;
    if (opts.fixed_effects) {
        std::set<std::string> all;
        for (const auto& key : subjects) all.insert(key.first);
        for (const auto& h : all)
            if (h != opts.reference_greenhouse) houses.push_back(h);
        covariates.insert(covariates.end(), houses.begin(), houses.end());
    }

    std::vector<SubjectRecords> panel_subjects;
    std::size_t dropped = 0;
    for (const auto& key : subjects) {
        SubjectRecords subject{key.first + "/" + key.second, {}};
        for (const auto& r : standardized) {
            if (r.greenhouse != key.first || r.line != key.second) continue;
            bool complete = r.state.has_value();
            std::vector<double> z;
            for (const auto& v : opts.standardize) {
                if (r.field(v)) {
                    z.push_back(*r.field(v));
                } else {
                    complete = false;
                }
            }
            if (!complete) {
                ++dropped;
                continue;
            }
            for (const auto& h : houses) z.push_back(r.greenhouse == h ? 1.0 : 0.0);
            subject.observations.push_back(PanelObservation{static_cast<double>(r.day), *r.state, std::move(z)});
        }
        if (subject.observations.empty()) {
            out.warnings.push_back("subject '" + subject.id + "' has no complete line-days");
            continue;
        }
        panel_subjects.push_back(std::move(subject));
    }
    if (dropped > 0) {
        out.warnings.push_back(std::to_string(dropped) + " line-days dropped for missing yield or covariates");
    }
    out.panel = PanelDataset(std::move(covariates), std::move(panel_subjects));
    return out;
}

void write_daily_table(std::ostream& out, const DailyRecords& table) {
    out << "greenhouse,line,day,yield_kg,co2_ppm,rh_percent,par_umol,temp_c,water_l_m2,state\n";
    for (const auto& r : table) {
        out << csv::escape(r.greenhouse) << ',' << csv::escape(r.line) << ',' << r.day << ','
            << csv::format_6g(r.yield_kg) << ',' << csv::format_6g(r.co2_ppm) << ','
            << csv::format_6g(r.rh_percent) << ',' << csv::format_6g(r.par_umol) << ','
            << csv::format_6g(r.temp_c) << ',' << csv::format_6g(r.water_l_m2) << ','
            << (r.state ? std::to_string(*r.state) : std::string()) << '\n';
    }
}

PanelDataset round_significant(const PanelDataset& data, int digits) {
    auto round = [digits](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", digits, v);
        return std::strtod(buf, nullptr);
    };
    std::vector<SubjectRecords> subjects = data.subjects();
    for (auto& s : subjects) {
        for (auto& o : s.observations) {
            o.time = round(o.time);
            for (auto& z : o.covariates) z = round(z);
        }
    }
    return PanelDataset(data.covariate_names(), std::move(subjects));
}

}  // namespace yieldmsm::pipeline
