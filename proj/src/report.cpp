#include "dflysim/report.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include <openssl/sha.h>

namespace dflysim {

namespace {

const std::vector<std::string> kMetricColumns = {"T_i_ns", "T_c_ns", "C", "p95_ns", "p99_ns",
                                                 "iterations_isolated", "iterations_contended", "unstable", "error"};

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

// RFC 4180 record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string cur;
  bool quoted = false;
  char c;
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          cur += '"';
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return true;
}

double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t pos = 0;
  const auto v = std::stoull(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad integer '" + s + "'");
  return v;
}

}  // namespace

void emit_csv(std::ostream& out, const ReportTable& table) {
  out << "cell";
  for (const auto& a : table.axis_names) out << ',' << quote(a);
  for (const auto& m : kMetricColumns) out << ',' << m;
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.cell;
    for (const auto& v : r.axis_values) out << ',' << quote(v);
    out << ',' << fmt_double(r.t_isolated) << ',' << fmt_double(r.t_contended) << ',' << fmt_double(r.impact) << ','
        << fmt_double(r.p95) << ',' << fmt_double(r.p99) << ',' << r.iterations_isolated << ','
        << r.iterations_contended << ',' << (r.unstable ? 1 : 0) << ',' << quote(r.error) << '\n';
  }
}

ReportTable parse_csv(std::istream& in) {
  ReportTable t;
  std::vector<std::string> f;
  if (!read_record(in, f) || f.size() < kMetricColumns.size() + 1 || f.front() != "cell") {
    throw std::invalid_argument("not a sweep report: bad header");
  }
  const std::size_t naxes = f.size() - 1 - kMetricColumns.size();
  t.axis_names.assign(f.begin() + 1, f.begin() + 1 + static_cast<std::ptrdiff_t>(naxes));
  while (read_record(in, f)) {
    if (f.size() == 1 && f[0].empty()) continue;
    if (f.size() != naxes + 1 + kMetricColumns.size()) throw std::invalid_argument("sweep report row has wrong width");
    ReportRow r;
    r.cell = parse_u64(f[0]);
    r.axis_values.assign(f.begin() + 1, f.begin() + 1 + static_cast<std::ptrdiff_t>(naxes));
    std::size_t i = naxes + 1;
    r.t_isolated = parse_double(f[i++]);
    r.t_contended = parse_double(f[i++]);
    r.impact = parse_double(f[i++]);
    r.p95 = parse_double(f[i++]);
    r.p99 = parse_double(f[i++]);
    r.iterations_isolated = parse_u64(f[i++]);
    r.iterations_contended = parse_u64(f[i++]);
    r.unstable = f[i++] == "1";
    r.error = f[i++];
    t.rows.push_back(std::move(r));
  }
  return t;
}

ReportRow make_row(std::uint64_t cell, std::vector<std::string> axis_values, const CongestionReport& r) {
  ReportRow row;
  row.cell = cell;
  row.axis_values = std::move(axis_values);
  row.t_isolated = r.t_isolated;
  row.t_contended = r.t_contended;
  row.impact = r.impact;
  row.p95 = r.contended.p95;
  row.p99 = r.contended.p99;
  row.iterations_isolated = r.isolated.samples.size();
  row.iterations_contended = r.contended.samples.size();
  row.unstable = r.unstable;
  return row;
}

SweepOutput run_sweep(const YAML::Node& base, const std::vector<SweepAxis>& axes, unsigned jobs) {
  if (axes.empty()) throw ConfigError("a sweep needs at least one axis");
  std::size_t cells = 1;
  for (const auto& a : axes) cells *= a.values.size();

  SweepOutput out;
  for (const auto& a : axes) out.table.axis_names.push_back(a.key);
  out.table.rows.resize(cells);
  out.reports.resize(cells);

  BaselineCache cache;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= cells) return;
      std::vector<std::string> values;
      YAML::Node doc = YAML::Clone(base);
      doc.remove("sweep");
      std::size_t rest = cell;
      std::vector<std::size_t> idx(axes.size());
      for (std::size_t k = axes.size(); k-- > 0;) {
        idx[k] = rest % axes[k].values.size();
        rest /= axes[k].values.size();
      }
      for (std::size_t k = 0; k < axes.size(); ++k) {
        const auto& v = axes[k].values[idx[k]];
        values.push_back(scalar_text(v));
      }
      ReportRow row;
      CongestionReport report;
      try {
        for (std::size_t k = 0; k < axes.size(); ++k) set_dotted(doc, axes[k].key, axes[k].values[idx[k]]);
        const auto cfg = parse_scenario(doc);
        report = run_congestion(cfg, &cache);
        row = make_row(cell, values, report);
      } catch (const std::exception& e) {
        row = ReportRow{};
        row.cell = cell;
        row.axis_values = values;
        row.error = e.what();
      }
      // Slots are disjoint, so writes need no lock.
      out.table.rows[cell] = std::move(row);
      out.reports[cell] = std::move(report);
    }
  };
  const unsigned n = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(cells)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }
  out.baseline_hits = cache.hits();
  out.baseline_misses = cache.misses();
  return out;
}

std::string git_blob_hash(const std::string& text) {
  const std::string blob = "blob " + std::to_string(text.size()) + std::string(1, '\0') + text;
  unsigned char md[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), md);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned char b : md) {
    s += hex[b >> 4];
    s += hex[b & 15];
  }
  return s;
}

namespace {

nlohmann::json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Map: {
      auto j = nlohmann::json::object();
      for (const auto& kv : n) j[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return j;
    }
    case YAML::NodeType::Sequence: {
      auto j = nlohmann::json::array();
      for (const auto& v : n) j.push_back(yaml_to_json(v));
      return j;
    }
    case YAML::NodeType::Scalar: {
      const auto& s = n.Scalar();
      if (s == "true") return true;
      if (s == "false") return false;
      try {
        std::size_t pos = 0;
        const long long i = std::stoll(s, &pos);
        if (pos == s.size()) return i;
        const double d = std::stod(s, &pos);
        if (pos == s.size()) return d;
      } catch (const std::exception&) {
      }
      return s;
    }
    default:
      return nullptr;
  }
}

nlohmann::json stats_json(const RunStats& s) {
  return {{"iterations", s.samples.size()}, {"mean_ns", s.mean},           {"median_ns", s.median},
          {"p95_ns", s.p95},                {"p99_ns", s.p99},             {"ci95_halfwidth_rel", s.ci95_halfwidth_rel},
          {"victim_time_ns", s.victim_time_ns}, {"unstable", s.unstable}};
}

nlohmann::json header(const ScenarioConfig& cfg) {
  const auto text = canonical_text(cfg);
  return {{"config_hash", git_blob_hash(text)}, {"config", yaml_to_json(to_yaml(cfg))}};
}

}  // namespace

nlohmann::json summary_json(const ScenarioConfig& cfg, const CongestionReport& r) {
  auto j = header(cfg);
  j["T_i_ns"] = r.t_isolated;
  j["T_c_ns"] = r.t_contended;
  j["C"] = r.impact;
  j["unstable"] = r.unstable;
  j["isolated"] = stats_json(r.isolated);
  j["contended"] = stats_json(r.contended);
  return j;
}

nlohmann::json summary_json(const ScenarioConfig& cfg, const SweepOutput& sweep) {
  auto j = header(cfg);
  j["axes"] = sweep.table.axis_names;
  j["baseline_cache"] = {{"hits", sweep.baseline_hits}, {"misses", sweep.baseline_misses}};
  auto cells = nlohmann::json::array();
  for (const auto& r : sweep.table.rows) {
    nlohmann::json c = {{"cell", r.cell}, {"values", r.axis_values}, {"C", r.impact}, {"unstable", r.unstable}};
    if (!r.error.empty()) c["error"] = r.error;
    cells.push_back(std::move(c));
  }
  j["cells"] = std::move(cells);
  return j;
}

void write_samples_csv(std::ostream& out, const CongestionReport& report) {
  out << "run,iteration,time_ns\n";
  auto dump = [&](const char* name, const RunStats& s) {
    for (std::size_t i = 0; i < s.samples.size(); ++i) out << name << ',' << i << ',' << fmt_double(s.samples[i]) << '\n';
  };
  dump("isolated", report.isolated);
  dump("contended", report.contended);
}

void write_series_csv(std::ostream& out, const std::vector<std::vector<std::uint64_t>>& series, std::int64_t window_ns) {
  out << "window_start_ns,job,bytes,gbps\n";
  std::size_t windows = 0;
  for (const auto& s : series) windows = std::max(windows, s.size());
  for (std::size_t w = 0; w < windows; ++w) {
    for (std::size_t j = 0; j < series.size(); ++j) {
      const std::uint64_t b = w < series[j].size() ? series[j][w] : 0;
      const double gbps = window_ns > 0 ? static_cast<double>(b) * 8.0 / static_cast<double>(window_ns) : 0.0;
      out << static_cast<std::int64_t>(w) * window_ns << ',' << j << ',' << b << ',' << fmt_double(gbps) << '\n';
    }
  }
}

}  // namespace dflysim
