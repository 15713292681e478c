#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "dflysim/config.hpp"
#include "dflysim/harness.hpp"
#include "dflysim/report.hpp"
#include "dflysim/topology.hpp"

namespace fs = std::filesystem;
using namespace dflysim;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c, bool needs_config) {
  auto* opt = cmd->add_option("--config", c.config, "Scenario YAML file");
  if (needs_config) opt->required();
  cmd->add_option("--seed", c.seed, "Overrides the scenario seed");
  cmd->add_option("--out", c.out, "Output directory");
}

std::ofstream open_out(const Common& c, const std::string& name, fs::path& path) {
  fs::create_directories(c.out);
  path = fs::path(c.out) / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void announce(const fs::path& p) { std::cout << p.string() << '\n'; }

ScenarioConfig load(const Common& c) {
  auto cfg = load_scenario(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

void print_topology(const Topology& t) {
  std::printf("groups=%u\n", t.num_groups());
  std::printf("switches=%u\n", t.num_switches());
  std::printf("endpoints=%u\n", t.num_endpoints());
  std::printf("local_links=%zu\n", t.count_links(Medium::Copper, false));
  std::printf("global_links=%zu\n", t.count_links(Medium::Optical, false));
  std::printf("diameter=%u\n", switch_diameter(t));
  std::printf("bisection_gbps=%.17g\n", bisection_bound(t));
  std::printf("all_to_all_gbps=%.17g\n", all_to_all_bound(t));
}

int cmd_topo_build(const Common& c) {
  const auto params = parse_topology_section(load_yaml_file(c.config));
  const auto topo = build_dragonfly(params);
  fs::path p;
  auto f = open_out(c, "topology.adj", p);
  export_adjacency(topo, f);
  f.close();
  announce(p);
  return 0;
}

struct MaxScale {
  bool enabled = false;
  std::uint32_t radix = kSwitchRadix;
  std::uint32_t endpoints_per_switch = 16;
  std::optional<std::uint64_t> address_limit;
};

int cmd_topo_info(const Common& c, const MaxScale& m) {
  if (m.enabled) {
    // Counts only: building a quarter-million-endpoint graph is pointless for a size query.
    const auto s = max_system(m.radix, m.endpoints_per_switch, m.address_limit);
    std::printf("groups=%llu\n", static_cast<unsigned long long>(s.groups));
    std::printf("switches_per_group=%u\n", s.switches_per_group);
    std::printf("global_ports_per_switch=%u\n", s.global_ports_per_switch);
    std::printf("endpoints=%llu\n", static_cast<unsigned long long>(s.endpoints));
    return 0;
  }
  if (c.config.empty()) throw ConfigError("topo-info needs --config or --max-scale");
  print_topology(build_dragonfly(parse_topology_section(load_yaml_file(c.config))));
  return 0;
}

int cmd_validate(const Common& c) {
  const auto cfg = load(c);
  (void)cfg;
  const auto root = load_yaml_file(c.config);
  const auto axes = parse_sweep_axes(root);
  std::size_t cells = 1;
  for (const auto& a : axes) cells *= a.values.size();
  std::cout << "ok";
  if (!axes.empty()) std::cout << " (" << cells << " sweep cells)";
  std::cout << '\n';
  return 0;
}

int cmd_run(const Common& c) {
  const auto cfg = load(c);
  std::ofstream trace_file;
  fs::path p;
  if (cfg.outputs.switch_trace) trace_file = open_out(c, "switch_trace.csv", p);
  std::ostream* trace = cfg.outputs.switch_trace ? &trace_file : nullptr;
  if (trace) announce(p);

  nlohmann::json summary;
  RunResult detail;
  if (cfg.harness.mode == HarnessConfig::Mode::Series) {
    detail = run_series(cfg, trace);
    auto f = open_out(c, "series.csv", p);
    write_series_csv(f, detail.series, cfg.harness.series_window_ns);
    announce(p);
    summary = summary_json(cfg, CongestionReport{});
    summary.erase("T_i_ns");
    summary.erase("T_c_ns");
    summary.erase("C");
    summary.erase("isolated");
    summary.erase("contended");
    summary.erase("unstable");
  } else {
    const auto rep = run_congestion(cfg, nullptr, trace, &detail);
    ReportTable table;
    table.rows.push_back(make_row(0, {}, rep));
    auto f = open_out(c, "report.csv", p);
    emit_csv(f, table);
    announce(p);
    auto s = open_out(c, "samples.csv", p);
    write_samples_csv(s, rep);
    announce(p);
    summary = summary_json(cfg, rep);
    std::fprintf(stderr, "T_i=%.1f ns T_c=%.1f ns C=%.4f%s\n", rep.t_isolated, rep.t_contended, rep.impact,
                 rep.unstable ? " (unstable)" : "");
  }
  summary["counters"] = {{"packets_injected", detail.counters.packets_injected},
                         {"packets_delivered", detail.counters.packets_delivered},
                         {"packets_dropped", detail.counters.packets_dropped},
                         {"packets_in_flight", detail.packets_in_flight},
                         {"nonminimal_packets", detail.counters.nonminimal_packets},
                         {"events", detail.events}};
  if (cfg.outputs.window_log) {
    auto w = open_out(c, "window_log.csv", p);
    write_window_log(w, detail.window_log);
    announce(p);
  }
  if (trace) trace_file.close();
  auto j = open_out(c, "summary.json", p);
  j << summary.dump(2) << '\n';
  announce(p);
  return 0;
}

int cmd_sweep(const Common& c, unsigned jobs) {
  const auto root = load_yaml_file(c.config);
  auto cfg = parse_scenario(root);
  YAML::Node base = YAML::Clone(root);
  if (c.seed) {
    base["seed"] = *c.seed;
    cfg.seed = *c.seed;
  }
  const auto axes = parse_sweep_axes(root);
  if (axes.empty()) throw ConfigError("sweep needs a sweep.axes section");
  // Every cell must parse before any simulation starts.
  std::size_t cells = 1;
  for (const auto& a : axes) cells *= a.values.size();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    YAML::Node doc = YAML::Clone(base);
    doc.remove("sweep");
    std::size_t rest = cell;
    for (std::size_t k = axes.size(); k-- > 0;) {
      set_dotted(doc, axes[k].key, axes[k].values[rest % axes[k].values.size()]);
      rest /= axes[k].values.size();
    }
    try {
      (void)parse_scenario(doc);
    } catch (const ConfigError& e) {
      throw ConfigError("sweep cell " + std::to_string(cell) + ": " + e.what());
    }
  }
  const auto out = run_sweep(base, axes, jobs);
  fs::path p;
  auto f = open_out(c, "sweep.csv", p);
  emit_csv(f, out.table);
  announce(p);
  auto j = open_out(c, "summary.json", p);
  j << summary_json(cfg, out).dump(2) << '\n';
  announce(p);
  std::size_t failed = 0;
  for (const auto& r : out.table.rows) failed += r.error.empty() ? 0 : 1;
  std::fprintf(stderr, "%zu cells, %zu failed, baseline cache %llu hits / %llu misses\n", out.table.rows.size(), failed,
               static_cast<unsigned long long>(out.baseline_hits), static_cast<unsigned long long>(out.baseline_misses));
  return failed == 0 ? 0 : 2;
}

int cmd_report(const Common& c, const std::string& in_path) {
  std::ifstream in(in_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open report '" + in_path + "'");
  ReportTable t;
  try {
    t = parse_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(in_path + ": " + e.what());
  }
  // Each axis column is as wide as its longest entry, name included.
  std::vector<int> width;
  for (std::size_t i = 0; i < t.axis_names.size(); ++i) {
    std::size_t w = t.axis_names[i].size();
    for (const auto& r : t.rows) w = std::max(w, r.axis_values[i].size());
    width.push_back(static_cast<int>(w) + 2);
  }
  for (std::size_t i = 0; i < t.axis_names.size(); ++i) std::printf("%-*s", width[i], t.axis_names[i].c_str());
  std::printf("%14s %14s %9s\n", "T_i_ns", "T_c_ns", "C");
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.axis_values.size(); ++i) std::printf("%-*s", width[i], r.axis_values[i].c_str());
    if (!r.error.empty()) {
      std::printf("error: %s\n", r.error.c_str());
      continue;
    }
    std::printf("%14.1f %14.1f %9.4f%s\n", r.t_isolated, r.t_contended, r.impact, r.unstable ? " unstable" : "");
  }
  if (c.out != ".") {
    fs::path p;
    auto f = open_out(c, "report.csv", p);
    emit_csv(f, t);
    announce(p);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Packet-level dragonfly network simulator"};
  app.require_subcommand(1);

  Common c;
  MaxScale m;
  unsigned jobs = 1;
  std::string report_in;

  auto* build = app.add_subcommand("topo-build", "Write the adjacency list of the configured topology");
  add_common(build, c, true);
  auto* info = app.add_subcommand("topo-info", "Print topology size, diameter and bandwidth bounds");
  add_common(info, c, false);
  info->add_flag("--max-scale", m.enabled, "Largest system for one switch radix");
  info->add_option("--radix", m.radix, "Switch radix for --max-scale");
  info->add_option("--endpoints-per-switch", m.endpoints_per_switch, "Endpoints per switch for --max-scale");
  info->add_option("--address-limit", m.address_limit, "Cap on addressable groups for --max-scale");
  auto* val = app.add_subcommand("validate", "Check a scenario without simulating");
  add_common(val, c, true);
  auto* run = app.add_subcommand("run", "Run one scenario");
  add_common(run, c, true);
  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of sweep.axes");
  add_common(sweep, c, true);
  sweep->add_option("--jobs", jobs, "Cells simulated in parallel")->check(CLI::PositiveNumber);
  auto* report = app.add_subcommand("report", "Print a sweep CSV as a table");
  add_common(report, c, false);
  report->add_option("--in", report_in, "Sweep CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*build) return cmd_topo_build(c);
    if (*info) return cmd_topo_info(c, m);
    if (*val) return cmd_validate(c);
    if (*run) return cmd_run(c);
    if (*sweep) return cmd_sweep(c, jobs);
    if (*report) return cmd_report(c, report_in);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
