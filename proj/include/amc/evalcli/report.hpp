#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace amc::eval {

inline constexpr int kReportSchemaVersion = 1;

// One evaluated cell at one SNR bin (snr_db empty = all bins pooled).
struct SerRow {
  std::string offline;
  std::string online;
  std::size_t shots = 0;
  std::optional<double> snr_db;
  std::string attack;
  std::size_t wrong = 0;
  std::size_t n = 0;
  std::uint64_t seed = 0;

  double ser() const { return n ? static_cast<double>(wrong) / static_cast<double>(n) : 0.0; }
  bool operator==(const SerRow&) const = default;
};

// Shots per class a method needed to reach the efficiency threshold, with
// mean times over seeds.
struct EfficiencyRow {
  std::string offline;
  std::string online;
  std::size_t shots = 0;          // shots used (the cap when not reached)
  bool reached = false;
  double mean_ser = 0.0;          // seed-averaged SER at `shots`
  double threshold = 0.0;
  double offline_cpu_seconds = 0.0;
  double offline_wall_seconds = 0.0;
  double online_cpu_seconds = 0.0;
  double online_wall_seconds = 0.0;
  std::vector<std::pair<std::size_t, double>> curve;  // (shots, seed-averaged SER) as swept

  bool operator==(const EfficiencyRow&) const = default;
};

struct SerReport {
  std::string config_digest;
  std::vector<std::uint64_t> seeds;
  std::vector<SerRow> rows;
  std::vector<EfficiencyRow> efficiency;

  bool operator==(const SerReport&) const = default;
};

inline constexpr const char* kCsvHeader = "offline,online,shots,snr_db,attack,ser,n,seed";

// One line per row under kCsvHeader; pooled rows carry snr_db "all".
std::string report_csv(const SerReport& r);
std::string efficiency_csv(const SerReport& r);
nlohmann::json report_to_json(const SerReport& r);
SerReport report_from_json(const nlohmann::json& j);

struct SummaryRow {
  std::string offline;
  std::string online;
  std::size_t shots = 0;
  double mean = 0.0;  // pooled SER averaged over attacks, then over seeds
  double std = 0.0;   // sample standard deviation over seeds
  std::size_t seeds = 0;
};

std::vector<SummaryRow> summarize(const SerReport& r);
// Seed-averaged pooled SER of one cell; NaN when absent.
double mean_ser(const SerReport& r, const std::string& offline, const std::string& online,
                std::size_t shots);

// Writes report.csv, report.json, summary.csv, efficiency.csv (when present)
// and one SER-vs-SNR SVG per (online strategy, shots) under `dir`. Returns the
// written paths. Throws IoError when the directory is not writable.
std::vector<std::filesystem::path> emit_report(const SerReport& r, const std::filesystem::path& dir);
SerReport load_report(const std::filesystem::path& json_path);

// Minimal SVG line chart: one polyline per series over shared x values.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

}  // namespace amc::eval
