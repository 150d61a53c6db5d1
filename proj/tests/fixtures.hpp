#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "yieldmsm/pipeline.hpp"

namespace yieldmsm::test {

// Synthetic greenhouse study: houses GH-1..GH-4, 15-minute climate with a
// diurnal cycle, a few missing readings, and weekly per-line harvests.
struct Study {
    std::vector<pipeline::RawSeries> sensors;
    std::vector<pipeline::HarvestRecord> harvest;
};

struct Affine {
    double scale = 1.0;
    double shift = 0.0;
};

inline constexpr std::int64_t kStudyStartDay = 19783;  // 2024-03-01

inline Study synthetic_study(std::uint64_t seed, int days = 62, int lines = 6,
                             const std::vector<Affine>& transform = {}) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::vector<std::string> houses = {"GH-1", "GH-2", "GH-3", "GH-4"};
    const std::vector<std::string> variables = {"CO2", "RH", "PAR", "Temp", "Water"};
    const std::vector<double> level = {420.0, 70.0, 300.0, 22.0, 3.0};
    const std::vector<double> swing = {40.0, 10.0, 250.0, 4.0, 0.5};

    Study study;
    const double pi = 3.14159265358979323846;
    for (std::size_t h = 0; h < houses.size(); ++h) {
        std::vector<std::vector<double>> daily_offset(variables.size());
        for (std::size_t v = 0; v < variables.size(); ++v) {
            double drift = 0.0;
            for (int d = 0; d < days; ++d) {
                drift = 0.8 * drift + noise(rng);
                daily_offset[v].push_back(drift + 0.3 * static_cast<double>(h));
            }
        }
        for (std::size_t v = 0; v < variables.size(); ++v) {
            pipeline::RawSeries s;
            s.greenhouse = houses[h];
            s.variable = variables[v];
            s.start_minute = kStudyStartDay * 1440;
            s.cadence_minutes = 15;
            for (int d = 0; d < days; ++d) {
                for (int slot = 0; slot < 96; ++slot) {
                    double x = level[v] + swing[v] * std::sin(2.0 * pi * slot / 96.0) +
                               0.1 * swing[v] * (daily_offset[v][static_cast<std::size_t>(d)] + 0.5 * noise(rng));
                    if (v < transform.size()) x = transform[v].scale * x + transform[v].shift;
                    s.values.emplace_back(unit(rng) < 0.01 ? std::nullopt : std::optional<double>(x));
                }
            }
            study.sensors.push_back(std::move(s));
        }
        for (int l = 1; l <= lines; ++l) {
            for (int d = 0; d < days; d += 7) {
                const double y = std::max(
                    0.0, 0.85 + 0.35 * std::sin(0.2 * d + l + static_cast<double>(h)) + 0.25 * noise(rng));
                study.harvest.push_back({houses[h], "L" + std::to_string(l), d, y});
            }
        }
    }
    return study;
}

inline std::string format_minute(std::int64_t minute) {
    const std::chrono::sys_days day{std::chrono::days{minute / 1440}};
    const std::chrono::year_month_day ymd{day};
    const auto in_day = minute % 1440;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(in_day / 60), static_cast<int>(in_day % 60));
    return buf;
}

inline std::string sensor_csv(const Study& study) {
    std::ostringstream out;
    out << "timestamp,greenhouse,variable,value\n";
    out.precision(17);
    for (const auto& s : study.sensors) {
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            out << format_minute(s.start_minute + static_cast<std::int64_t>(i) * s.cadence_minutes) << ','
                << s.greenhouse << ',' << s.variable << ',';
            if (s.values[i]) out << *s.values[i];
            out << '\n';
        }
    }
    return out.str();
}

inline std::string harvest_csv(const Study& study) {
    std::ostringstream out;
    out << "greenhouse,line,day,yield_kg\n";
    out.precision(17);
    for (const auto& h : study.harvest) out << h.greenhouse << ',' << h.line << ',' << h.day << ',' << h.yield_kg << '\n';
    return out.str();
}

}  // namespace yieldmsm::test
