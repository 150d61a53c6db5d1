#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace yieldmsm::csv {

struct Row {
    std::size_t line = 0;  // 1-based line in the source
    std::vector<std::string> fields;
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;

    /// Column index for a header name; throws InputError when absent.
    std::size_t column(std::string_view name) const;
};

/// Minimal RFC 4180 reader: comma separated, optional double quotes, header
/// line required, blank lines skipped. Rows must match the header width.
Table read(std::istream& in);

std::vector<std::string> split_line(std::string_view line);

/// Field parsing with line-anchored InputError messages.
double parse_double(std::string_view field, const Row& row, std::string_view column);
std::optional<double> parse_optional_double(std::string_view field, const Row& row,
                                            std::string_view column);
long parse_integer(std::string_view field, const Row& row, std::string_view column);

/// Shortest decimal text that parses back to the same double.
std::string format_exact(double value);
/// Six significant digits (%.6g); NaN/empty optional renders as "".
std::string format_6g(double value);
std::string format_6g(const std::optional<double>& value);

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

}  // namespace yieldmsm::csv
