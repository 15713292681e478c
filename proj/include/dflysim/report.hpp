#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "dflysim/config.hpp"
#include "dflysim/harness.hpp"

namespace dflysim {

// One sweep cell. Times are means in ns; percentiles come from the contended run.
struct ReportRow {
  std::uint64_t cell = 0;
  std::vector<std::string> axis_values;
  double t_isolated = 0.0;
  double t_contended = 0.0;
  double impact = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  std::uint64_t iterations_isolated = 0;
  std::uint64_t iterations_contended = 0;
  bool unstable = false;
  std::string error;  // empty unless the cell failed
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

struct ReportTable {
  std::vector<std::string> axis_names;
  std::vector<ReportRow> rows;
  friend bool operator==(const ReportTable&, const ReportTable&) = default;
};

// Header: cell,<axes...>,T_i_ns,T_c_ns,C,p95_ns,p99_ns,iterations_isolated,iterations_contended,unstable,error
void emit_csv(std::ostream& out, const ReportTable& table);
ReportTable parse_csv(std::istream& in);

ReportRow make_row(std::uint64_t cell, std::vector<std::string> axis_values, const CongestionReport& r);

struct SweepOutput {
  ReportTable table;
  std::vector<CongestionReport> reports;  // by cell index; default-constructed for failed cells
  std::uint64_t baseline_hits = 0;
  std::uint64_t baseline_misses = 0;
};

// Cartesian product of the axes over `base` (axis order as given, last axis fastest). Runs up to
// `jobs` cells at once; results are ordered by cell index.
SweepOutput run_sweep(const YAML::Node& base, const std::vector<SweepAxis>& axes, unsigned jobs);

// Lowercase hex SHA-1 of "blob <len>\0<text>", as git hashes a file holding `text`.
std::string git_blob_hash(const std::string& text);

nlohmann::json summary_json(const ScenarioConfig& cfg, const CongestionReport& report);
nlohmann::json summary_json(const ScenarioConfig& cfg, const SweepOutput& sweep);

// Columns: run,iteration,time_ns
void write_samples_csv(std::ostream& out, const CongestionReport& report);
// Columns: window_start_ns,job,bytes,gbps
void write_series_csv(std::ostream& out, const std::vector<std::vector<std::uint64_t>>& series, std::int64_t window_ns);

}  // namespace dflysim
