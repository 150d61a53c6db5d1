#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace yieldmsm::cli {

inline constexpr const char* kToolVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitOther = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumerical = 3;

/// Command-line values that take precedence over the config file.
struct Overrides {
    std::optional<std::string> algorithm;
    std::optional<double> horizon;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand and returns its exit code. Error messages go to `err`,
/// the text summary to `out`. Every run writes `<command>.manifest.json` into
/// the output directory.
int run_command(const std::string& command, const std::string& config_path, const Overrides& overrides,
                std::ostream& out, std::ostream& err);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace yieldmsm::cli
