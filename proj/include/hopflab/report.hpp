#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace hopflab {

/// Full-precision decimal rendering; round-trips IEEE doubles.
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct CsvTable {
  std::string name; // file stem
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("report: cannot write " + path.string());
  for (size_t i = 0; i < t.header.size(); ++i) {
    if (i) out << ',';
    out << t.header[i];
  }
  out << '\n';
  for (const auto& row : t.rows) {
    if (row.size() != t.header.size())
      throw std::runtime_error("report: ragged row in table " + t.name);
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_g17(row[i]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("report: write failure on " + path.string());
}

/// Everything a task run wants persisted. The summary must be a pure
/// function of the canonical config: scheduling details and timestamps
/// go to the side file instead.
struct RunArtifacts {
  nlohmann::ordered_json summary;
  std::vector<CsvTable> tables;
  std::vector<std::string> report_lines; // human-readable digest
};

inline void write_artifacts(const std::filesystem::path& dir, const RunArtifacts& art,
                            bool json_format, bool csv_format, int workers) {
  std::filesystem::create_directories(dir);
  if (json_format) {
    std::ofstream out(dir / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write summary.json");
    out << art.summary.dump(2) << '\n';
    if (!out) throw std::runtime_error("report: write failure on summary.json");
  }
  if (csv_format)
    for (const auto& t : art.tables) write_csv(dir / (t.name + ".csv"), t);
  {
    std::ofstream out(dir / "report.txt", std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write report.txt");
    for (const auto& line : art.report_lines) out << line << '\n';
  }
  {
    // Run-varying metadata lives apart from the summary so that reruns
    // of one config stay byte-identical where it matters.
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch());
    nlohmann::ordered_json meta;
    meta["timestamp_unix"] = secs.count();
    meta["workers"] = workers;
    std::ofstream out(dir / "run_meta.json", std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write run_meta.json");
    out << meta.dump(2) << '\n';
  }
}

}  // namespace hopflab
