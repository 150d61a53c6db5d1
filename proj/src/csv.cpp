#include "yieldmsm/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>

#include "yieldmsm/error.hpp"

namespace yieldmsm::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string where(const Row& row, std::string_view column) {
    return "line " + std::to_string(row.line) + ", column '" + std::string(column) + "'";
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    throw InputError("missing CSV column '" + std::string(name) + "'");
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back(trim(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (quoted) throw InputError("unterminated quoted CSV field");
    fields.emplace_back(trim(current));
    return fields;
}

Table read(std::istream& in) {
    Table table;
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw InputError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(table.header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        }
        table.rows.push_back(Row{line_no, std::move(fields)});
    }
    if (!have_header) throw InputError("CSV input is empty (header required)");
    return table;
}

double parse_double(std::string_view field, const Row& row, std::string_view column) {
    auto value = parse_optional_double(field, row, column);
    if (!value) throw InputError(where(row, column) + ": value required");
    return *value;
}

std::optional<double> parse_optional_double(std::string_view field, const Row& row,
                                            std::string_view column) {
    field = trim(field);
    if (field.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = field.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
        throw InputError(where(row, column) + ": '" + std::string(field) + "' is not a finite number");
    }
    return value;
}

long parse_integer(std::string_view field, const Row& row, std::string_view column) {
    field = trim(field);
    long value = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw InputError(where(row, column) + ": '" + std::string(field) + "' is not an integer");
    }
    return value;
}

std::string format_exact(double value) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) throw InputError("cannot format number");
    return std::string(buf, ptr);
}

std::string format_6g(double value) {
    if (std::isnan(value)) return "";
    if (value == 0.0) return "0";  // also folds -0
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", value);
    return buf;
}

std::string format_6g(const std::optional<double>& value) {
    return value ? format_6g(*value) : std::string();
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

}  // namespace yieldmsm::csv
