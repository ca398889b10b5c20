#pragma once

// Report files: <command>.json (canonical, deterministic), <table>.csv and a
// <command>.meta.json sidecar carrying the run-specific facts.

#include <sqft/cli/commands.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace sqft::cli {

inline std::string csv_text(const CsvTable& t) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos)
      return s;
    std::string q = "\"";
    for (char c : s)
      q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  std::string out;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    out += (i ? "," : "") + quote(t.header[i]);
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      out += (i ? "," : "") + quote(row[i]);
    out += "\n";
  }
  return out;
}

inline std::string report_text(const json& report) { return report.dump(2) + "\n"; }

namespace detail {

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out)
    throw Error("cannot write " + path.string());
}

inline std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace detail

/// Writes the files selected by rc.format; returns their paths.
inline std::vector<std::string> write_outputs(const std::string& command, const CommandResult& res,
                                              const RunConfig& rc, double wall_seconds) {
  namespace fs = std::filesystem;
  const fs::path dir(rc.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw Error("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::string> files;
  if (rc.format != "csv") {
    const auto path = dir / (command + ".json");
    detail::write_file(path, report_text(res.report));
    files.push_back(path.string());
  }
  if (rc.format != "json")
    for (const auto& t : res.tables) {
      const auto path = dir / (t.name + ".csv");
      detail::write_file(path, csv_text(t));
      files.push_back(path.string());
    }
  const json meta{{"schema_version", kSchemaVersion},
                  {"command", command},
                  {"generated_at", detail::utc_now()},
                  {"wall_seconds", wall_seconds},
                  {"workers", rc.workers},
                  {"format", rc.format},
                  {"files", files},
                  {"verdict", res.pass ? json(*res.pass) : json()}};
  const auto meta_path = dir / (command + ".meta.json");
  detail::write_file(meta_path, meta.dump(2) + "\n");
  return files;
}

} // namespace sqft::cli
