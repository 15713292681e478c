// Acceptance gate: every criterion at its stated tolerance, one PASS/FAIL line each.
// Exit status is nonzero if any criterion fails or overruns its time budget.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dflysim/config.hpp"
#include "dflysim/harness.hpp"
#include "dflysim/network.hpp"
#include "dflysim/report.hpp"
#include "dflysim/topology.hpp"
#include "oracles.hpp"
#include "streams.hpp"

using namespace dflysim;
using namespace dflysim::testing;

namespace {

const std::string kConfigs = DFLYSIM_CONFIG_DIR;
const std::string kData = DFLYSIM_TEST_DATA;

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Conservation is checked on every simulated run the gate makes.
struct Conservation {
  std::uint64_t runs = 0;
  std::uint64_t violations = 0;
  std::string first;

  void check(const NetworkCounters& c, std::uint64_t in_flight, const std::string& what) {
    ++runs;
    if (c.packets_injected == c.packets_delivered + in_flight && c.packets_dropped == 0) return;
    if (violations++ == 0) {
      std::ostringstream s;
      s << what << ": injected " << c.packets_injected << " delivered " << c.packets_delivered << " in flight "
        << in_flight << " dropped " << c.packets_dropped;
      first = s.str();
    }
  }
  void check(const RunResult& r, const std::string& what) { check(r.counters, r.packets_in_flight, what); }
  void check(const Network& n, const std::string& what) { check(n.counters(), n.packets_in_flight(), what); }
} conservation;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

DragonflyParams params(std::uint32_t g, std::uint32_t s, std::uint32_t e, std::uint32_t intra = 1, std::uint32_t glob = 1) {
  DragonflyParams p;
  p.num_groups = g;
  p.switches_per_group = s;
  p.endpoints_per_switch = e;
  p.intra_links_per_pair = intra;
  p.global_links_per_group_pair = glob;
  return p;
}

// ---- 1
Outcome topology_math() {
  const auto full = max_system(64, 16);
  const auto capped = max_system(64, 16, 511);
  const bool ok = full.groups == 545 && full.endpoints == 279040 && capped.groups == 511 && capped.endpoints == 261632;
  return {ok, fmt("full %llu groups / %llu endpoints, limit 511: %llu groups / %llu endpoints",
                  (unsigned long long)full.groups, (unsigned long long)full.endpoints,
                  (unsigned long long)capped.groups, (unsigned long long)capped.endpoints)};
}

// ---- 2
Outcome bandwidth_bounds() {
  const auto t = build_dragonfly(params(8, 8, 16, 1, 8));
  const double bis = bisection_bound(t);
  const double a2a = all_to_all_bound(t);
  // Gb/s to TB/s; the comparison allows only floating-point representation error.
  const bool ok = std::abs(bis - 51200.0) < 1e-6 && std::abs(a2a - 102400.0) < 1e-6;
  return {ok, fmt("bisection %.1f Gb/s = %.2f TB/s, all-to-all %.1f Gb/s = %.2f TB/s", bis, bis / 8000, a2a, a2a / 8000)};
}

// ---- 3
Outcome diameter() {
  std::mt19937_64 rng(2024);
  int tested = 0;
  std::uint32_t worst = 0;
  while (tested < 50) {
    auto p = params(2 + rng() % 30, 1 + rng() % 16, 1 + rng() % 16, 1 + rng() % 2, 1 + rng() % 4);
    try {
      validate(p);
    } catch (const TopologyError&) {
      continue;
    }
    worst = std::max(worst, switch_diameter(build_dragonfly(p)));
    ++tested;
  }
  return {worst <= 3, fmt("%d random instances, largest diameter %u", tested, worst)};
}

// ---- 4
struct Quiet : MessageListener {};

std::vector<double> small_latencies(const Topology& t, EndpointId dst) {
  Network net(t, NetworkConfig{}, 4);
  Quiet q;
  const auto id = net.add_listener(&q);
  std::vector<double> lat;
  net.on_delivery = [&](const PacketRecord& r) { lat.push_back(static_cast<double>((r.delivered - r.injected).ns)); };
  for (int k = 0; k < 10000; ++k) {
    net.run(SimTime{k * 5000LL});
    net.post(id, 0, dst, 8, 0, k);
  }
  net.run();
  conservation.check(net, "latency probe");
  return lat;
}

Outcome switch_latency() {
  // Endpoint 1 shares endpoint 0's switch; endpoint 2 sits one local hop away.
  const auto t = build_dragonfly(params(2, 2, 2));
  const auto one = small_latencies(t, 1);
  const auto two = small_latencies(t, 2);
  if (one.size() != 10000 || two.size() != 10000) return {false, "lost packets"};
  double lo = 1e18, hi = -1e18, sum = 0;
  for (std::size_t i = 0; i < one.size(); ++i) {
    const double d = two[i] - one[i];
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    sum += d;
  }
  const double mean = sum / static_cast<double>(one.size());
  const bool ok = lo >= 300 && hi <= 400 && std::abs(mean - 350) <= 10;
  return {ok, fmt("10000 packets, difference min %.0f max %.0f mean %.2f ns", lo, hi, mean)};
}

// ---- 5
Outcome alltoall_efficiency() {
  auto cfg = load_scenario(kConfigs + "/alltoall_efficiency.yaml", false);
  const auto t = build_dragonfly(cfg.topology);
  const auto r = run_victim(cfg, false);
  conservation.check(r, "alltoall");
  const double n = cfg.split.victim;
  const double bits = n * (n - 1) * static_cast<double>(cfg.victim.msg_bytes) * 8.0;
  const double gbps = bits / r.stats.mean;
  const double eff = gbps / all_to_all_bound(t);
  const bool ok = eff >= 0.85 && r.counters.packets_dropped == 0 && cfg.network.routing.adaptive;
  return {ok, fmt("%.0f Gb/s of %.0f bound = %.1f%%, mean iteration %.3f ms, drops %llu", gbps, all_to_all_bound(t),
                  100 * eff, r.stats.mean / 1e6, (unsigned long long)r.counters.packets_dropped)};
}

CongestionReport congestion(const ScenarioConfig& cfg, const std::string& what) {
  RunResult contended;
  auto rep = run_congestion(cfg, nullptr, nullptr, &contended);
  conservation.check(contended, what);
  return rep;
}

// ---- 6
Outcome cc_efficacy() {
  auto cfg = load_scenario(kConfigs + "/incast_cc.yaml", false);
  cfg.network.cc.enabled = true;
  const auto on = congestion(cfg, "incast cc on");
  cfg.network.cc.enabled = false;
  const auto off = congestion(cfg, "incast cc off");
  const bool ok = on.impact <= 1.3 && off.impact >= 2 * on.impact;
  return {ok, fmt("C(cc on) %.3f, C(cc off) %.3f, ratio %.1f", on.impact, off.impact, off.impact / on.impact)};
}

// ---- 7
double bystander_gbps(bool with_incast) {
  // Two global links per group pair leave the bystander's path room for its own stream plus the
  // throttled incast share that crosses it.
  const auto t = build_dragonfly(params(4, 4, 4, 1, 2));
  NetworkConfig nc;
  nc.cc.enabled = true;
  Network net(t, nc, 21);
  // Endpoint 0 streams to 20 in group 1. The incast targets 21 on the same destination switch and
  // includes endpoint 1 on endpoint 0's switch plus other group 0 endpoints, so it crosses the same
  // global links and destination switch.
  Streams by(net, {{0, 20}}, 0);
  std::vector<Flow> incast;
  for (EndpointId s : {1, 5, 9, 13, 16, 17, 24, 28, 33, 37, 41, 45, 48, 52, 57, 62}) incast.push_back({s, 21});
  Streams agg(net, incast, 1);
  const SimTime stop{400'000};
  by.measure(SimTime{100'000}, stop);
  by.start(stop);
  if (with_incast) agg.start(stop);
  net.run(stop);
  conservation.check(net, with_incast ? "bystander with incast" : "bystander alone");
  return by.gbps(0);
}

Outcome victim_protection() {
  const double solo = bystander_gbps(false);
  const double mixed = bystander_gbps(true);
  const double loss = 1.0 - mixed / solo;
  return {loss <= 0.05, fmt("bystander %.1f Gb/s alone, %.1f Gb/s beside a 16-to-1 incast, loss %.1f%%", solo, mixed,
                            100 * loss)};
}

// ---- 8
Outcome bursty_shape() {
  const auto base = load_yaml_file(kConfigs + "/bursty_incast.yaml");
  const auto axes = parse_sweep_axes(base);
  const auto sweep = run_sweep(base, axes, 1);

  // axis order: message size, burst size, gap
  std::map<std::array<std::string, 3>, double> c;
  std::set<std::uint64_t> sizes, bursts, gaps;
  for (const auto& row : sweep.table.rows) {
    if (!row.error.empty()) return {false, "cell failed: " + row.error};
    c[{row.axis_values[0], row.axis_values[1], row.axis_values[2]}] = row.impact;
    sizes.insert(std::stoull(row.axis_values[0]));
    bursts.insert(std::stoull(row.axis_values[1]));
    gaps.insert(std::stoull(row.axis_values[2]));
  }
  auto at = [&](std::uint64_t m, std::uint64_t b, std::uint64_t g) {
    return c.at({std::to_string(m), std::to_string(b), std::to_string(g)});
  };

  // Persistent reference: the same aggressor as a plain incast, per message size.
  YAML::Node persistent = YAML::Clone(base);
  persistent.remove("sweep");
  persistent["traffic"]["aggressor"] = YAML::Node(YAML::NodeType::Map);
  persistent["traffic"]["aggressor"]["kind"] = "incast";
  persistent["traffic"]["aggressor"]["msg_bytes"] = 8;
  SweepAxis msg_axis{"traffic.aggressor.msg_bytes", {}};
  for (auto m : sizes) msg_axis.values.push_back(YAML::Node(m));
  const auto ref = run_sweep(persistent, {msg_axis}, 1);
  std::map<std::uint64_t, double> c_persistent;
  for (const auto& row : ref.table.rows) c_persistent[std::stoull(row.axis_values[0])] = row.impact;

  std::vector<std::string> bad;
  for (auto m : sizes) {
    for (auto g : gaps) {
      double prev = 0;
      for (auto b : bursts) {
        if (at(m, b, g) < prev) {
          bad.push_back(fmt("msg %llu gap %llu: C falls to %.3f at burst %llu", (unsigned long long)m,
                            (unsigned long long)g, at(m, b, g), (unsigned long long)b));
        }
        prev = at(m, b, g);
      }
    }
    for (auto b : bursts) {
      double prev = 1e300;
      for (auto g : gaps) {
        if (at(m, b, g) > prev) {
          bad.push_back(fmt("msg %llu burst %llu: C rises to %.3f at gap %llu", (unsigned long long)m,
                            (unsigned long long)b, at(m, b, g), (unsigned long long)g));
        }
        prev = at(m, b, g);
      }
    }
    const auto full = *bursts.rbegin();
    for (auto g : gaps) {
      if (std::abs(at(m, full, g) / c_persistent[m] - 1.0) > 0.05) {
        bad.push_back(fmt("msg %llu gap %llu: C %.3f vs persistent %.3f", (unsigned long long)m, (unsigned long long)g,
                          at(m, full, g), c_persistent[m]));
      }
    }
  }
  // Peak over the whole grid must fall on an interior message size.
  auto peak = std::max_element(c.begin(), c.end(), [](auto& a, auto& b) { return a.second < b.second; });
  const auto peak_size = std::stoull(peak->first[0]);
  if (peak_size == *sizes.begin() || peak_size == *sizes.rbegin()) bad.push_back("peak at an end of the size range");

  std::ostringstream table;
  table << "peak C " << fmt("%.3f", peak->second) << " at msg " << peak_size << "; grid";
  for (auto m : sizes) {
    table << " | " << m << ":";
    for (auto g : gaps)
      for (auto b : bursts) table << fmt(" %.3f", at(m, b, g));
    table << fmt(" ref %.3f", c_persistent[m]);
  }
  for (const auto& b : bad) table << "; " << b;
  return {bad.empty(), table.str()};
}

// ---- 9
struct Shares {
  std::vector<double> both;  // job 0 share per window while both run
  double overall = 0;        // job 0 share summed over the overlap
  double survivor = 0;       // job 1 throughput after job 0 drains / combined throughput during overlap
};

Shares series_shares(const ScenarioConfig& cfg, const std::string& what) {
  const auto r = run_series(cfg);
  conservation.check(r, what);
  const auto w = cfg.harness.series_window_ns;
  const auto& s = r.series;
  const std::size_t first = static_cast<std::size_t>((cfg.aggressor->start_ns + 20'000) / w);
  const std::size_t last = static_cast<std::size_t>(*cfg.victim.stop_ns / w);  // exclusive
  Shares out;
  double a = 0, b = 0;
  for (std::size_t k = first; k < last; ++k) {
    out.both.push_back(static_cast<double>(s[0][k]) / static_cast<double>(s[0][k] + s[1][k]));
    a += static_cast<double>(s[0][k]);
    b += static_cast<double>(s[1][k]);
  }
  out.overall = a / (a + b);
  const double combined = (a + b) / static_cast<double>(last - first);
  std::size_t drained = last;
  while (drained < s[0].size() && s[0][drained] != 0) ++drained;
  double alone = 0;
  std::size_t n = 0;
  for (std::size_t k = drained; k < s[1].size(); ++k, ++n) alone += static_cast<double>(s[1][k]);
  out.survivor = n ? alone / static_cast<double>(n) / combined : 0.0;
  return out;
}

Outcome qos_shares() {
  auto cfg = load_scenario(kConfigs + "/qos_shares.yaml", false);
  const auto sep = series_shares(cfg, "shares separate");
  cfg.victim.tclass = cfg.aggressor->tclass;
  const auto same = series_shares(cfg, "shares same class");
  const auto [lo, hi] = std::minmax_element(sep.both.begin(), sep.both.end());
  const bool ok = std::abs(same.overall - 0.5) <= 0.05 && *lo >= 0.75 && *hi <= 0.85 && std::abs(sep.survivor - 1.0) <= 0.05;
  return {ok, fmt("same class %.3f/%.3f; separate classes per-window TC1 share %.3f..%.3f over %zu windows; survivor "
                  "%.3f of combined",
                  same.overall, 1 - same.overall, *lo, *hi, sep.both.size(), sep.survivor)};
}

// ---- 10
Outcome qos_isolation() {
  auto cfg = load_scenario(kConfigs + "/qos_isolation.yaml", false);
  const auto sep = congestion(cfg, "isolation separate");
  cfg.victim.tclass = cfg.aggressor->tclass;
  const auto same = congestion(cfg, "isolation same class");
  const bool ok = sep.impact <= 1.3 && same.impact >= 1.5;
  return {ok, fmt("C(separate classes) %.3f, C(same class) %.3f", sep.impact, same.impact)};
}

// ---- 11
Outcome oracle_equivalence() {
  std::uint64_t topologies = 0, pairs = 0, cuts = 0, mismatches = 0;
  for (std::uint32_t g = 1; g <= 6; ++g) {
    for (std::uint32_t s = 1; s <= 4; ++s) {
      for (std::uint32_t intra = 1; intra <= 2; ++intra) {
        for (std::uint32_t glob = 1; glob <= 3; ++glob) {
          const auto p = params(g, s, 1, intra, glob);
          try {
            validate(p);
          } catch (const TopologyError&) {
            continue;
          }
          const auto t = build_dragonfly(p);
          ++topologies;
          for (EndpointId a = 0; a < t.num_endpoints(); ++a) {
            for (EndpointId b = 0; b < t.num_endpoints(); ++b) {
              std::set<std::vector<std::uint32_t>> got;
              for (const auto& path : minimal_paths(t, a, b)) got.insert(flatten(path));
              if (got != oracle_shortest(t, t.switch_of(a), t.switch_of(b))) ++mismatches;
              ++pairs;
            }
          }
          if (g % 2 == 0) {
            ++cuts;
            if (std::abs(bisection_bound(t) - oracle_min_cut(t)) > 1e-9) ++mismatches;
          }
        }
      }
    }
  }
  return {mismatches == 0, fmt("%llu topologies, %llu endpoint pairs, %llu cuts, %llu mismatches",
                               (unsigned long long)topologies, (unsigned long long)pairs, (unsigned long long)cuts,
                               (unsigned long long)mismatches)};
}

// ---- 12
Outcome determinism() {
  auto csv = [] {
    const auto base = load_yaml_file(kData + "/tiny_sweep.yaml");
    std::ostringstream out;
    emit_csv(out, run_sweep(base, parse_sweep_axes(base), 1).table);
    return out.str();
  };
  const auto a = csv();
  const auto b = csv();
  auto cfg = load_scenario(kData + "/tiny.yaml", false);
  const auto r1 = run_victim(cfg, true);
  const auto r2 = run_victim(cfg, true);
  conservation.check(r1, "determinism run");
  const bool same_run = r1.stats.samples == r2.stats.samples && r1.events == r2.events;
  const bool ok = a == b && !a.empty() && same_run && conservation.violations == 0;
  std::string detail = fmt("sweep CSV %s (%zu bytes), repeated run %s; conservation held on %llu of %llu runs",
                           a == b ? "identical" : "DIFFERS", a.size(), same_run ? "identical" : "DIFFERS",
                           (unsigned long long)(conservation.runs - conservation.violations),
                           (unsigned long long)conservation.runs);
  if (conservation.violations) detail += "; first violation: " + conservation.first;
  return {ok, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

// Arguments, if any, select criteria by number.
int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<Criterion> criteria = {
      {1, "topology math", 1, topology_math},
      {2, "bandwidth bounds", 1, bandwidth_bounds},
      {3, "diameter", 10, diameter},
      {4, "switch latency", 30, switch_latency},
      {5, "all-to-all efficiency", 300, alltoall_efficiency},
      {6, "congestion control efficacy", 300, cc_efficacy},
      {7, "victim protection", 120, victim_protection},
      {8, "bursty congestion shape", 900, bursty_shape},
      {9, "qos shares", 300, qos_shares},
      {10, "qos isolation", 300, qos_isolation},
      {11, "oracle equivalence", 60, oracle_equivalence},
      // Last, so the conservation tally covers every run above.
      {12, "determinism and conservation", 60, determinism},
  };
  int failed = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("[%s] %2d %s: %s (%.2f s of %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
