#pragma once

// Rendering of JSON result files to Markdown and tidy plot-ready CSV.

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace deltalab {

inline constexpr int kResultSchemaVersion = 1;

/// Standard envelope written by every CLI command:
/// {schema_version, command, seed, config_hash, inputs, result}.
nlohmann::json result_envelope(const std::string& command, std::uint64_t seed, const nlohmann::json& config,
                               const nlohmann::json& inputs, nlohmann::json result);

/// Stable hash of a JSON value (compact dump, sorted keys).
std::string config_hash(const nlohmann::json& config);

std::string report_markdown(const nlohmann::json& envelope);

/// File name -> CSV contents; one tidy table per figure the result supports.
std::map<std::string, std::string> report_plot_tables(const nlohmann::json& envelope);

/// Writes report.md plus the plot tables into `dir`; returns the files written.
std::vector<std::filesystem::path> write_report(const nlohmann::json& envelope, const std::filesystem::path& dir);

}  // namespace deltalab
