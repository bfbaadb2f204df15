#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mfg/error.hpp"
#include "mfg/io.hpp"

namespace mfg::io {

std::string fmt(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return {buf, static_cast<std::size_t>(n)};
}

void write_text(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\r' || field.back() == '\t'))
      field.remove_suffix(1);
    out.emplace_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ValidationError("not a number: '" + std::string(s) + "'");
  return v;
}

std::string measure_to_csv(const EmpiricalMeasure& mu) {
  std::string out = "weight";
  for (std::size_t c = 0; c < mu.dim(); ++c) out += ",x" + std::to_string(c + 1);
  out += '\n';
  for (std::size_t i = 0; i < mu.size(); ++i) {
    out += fmt(mu.weight(i));
    for (double x : mu.point(i)) {
      out += ',';
      out += fmt(x);
    }
    out += '\n';
  }
  return out;
}

EmpiricalMeasure measure_from_csv(std::string_view text) {
  std::vector<double> w, pts;
  std::size_t dim = 0;
  bool first = true;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (first) {
      first = false;
      if (fields[0] == "weight") continue;
    }
    if (fields.size() < 2) throw ValidationError("measure csv line " + std::to_string(line_no) + ": need weight and coordinates");
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) throw DimensionError("measure csv line " + std::to_string(line_no) + ": ragged row");
    w.push_back(parse_double(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) pts.push_back(parse_double(fields[c]));
  }
  if (w.empty()) throw ValidationError("measure csv has no atoms");
  return EmpiricalMeasure(dim, std::move(pts), std::move(w));
}

void write_measure_csv(const std::filesystem::path& path, const EmpiricalMeasure& mu) {
  write_text(path, measure_to_csv(mu));
}

EmpiricalMeasure read_measure_csv(const std::filesystem::path& path) { return measure_from_csv(read_text(path)); }

nlohmann::json measure_to_json(const EmpiricalMeasure& mu) {
  nlohmann::json j;
  j["dim"] = mu.dim();
  j["weights"] = std::vector<double>(mu.weights().begin(), mu.weights().end());
  auto atoms = nlohmann::json::array();
  for (std::size_t i = 0; i < mu.size(); ++i) atoms.push_back(std::vector<double>(mu.point(i).begin(), mu.point(i).end()));
  j["points"] = std::move(atoms);
  return j;
}

EmpiricalMeasure measure_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    auto w = j.at("weights").get<std::vector<double>>();
    std::vector<double> pts;
    for (const auto& atom : j.at("points")) {
      auto x = atom.get<std::vector<double>>();
      if (x.size() != dim) throw DimensionError("measure json: atom length differs from dim");
      pts.insert(pts.end(), x.begin(), x.end());
    }
    return EmpiricalMeasure(dim, std::move(pts), std::move(w));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("measure json: ") + e.what());
  }
}

}  // namespace mfg::io
