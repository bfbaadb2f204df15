#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mfg/measures.hpp"

namespace mfg::io {

/// Round-trip decimal form used in every CSV the library writes.
std::string fmt(double v);

void write_text(const std::filesystem::path& path, std::string_view content);
std::string read_text(const std::filesystem::path& path);

/// Splits on commas; no quoting.
std::vector<std::string> split_csv_line(std::string_view line);
double parse_double(std::string_view s);

// One atom per row: weight,x1,..,xd (header line optional on read).
std::string measure_to_csv(const EmpiricalMeasure& mu);
EmpiricalMeasure measure_from_csv(std::string_view text);
void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu);
EmpiricalMeasure read_measure_csv(const std::filesystem::path& path);

nlohmann::json measure_to_json(const EmpiricalMeasure& mu);
EmpiricalMeasure measure_from_json(const nlohmann::json& j);

}  // namespace mfg::io
