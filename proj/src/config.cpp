#include "dflysim/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace dflysim {

namespace {

void check_keys(const YAML::Node& n, const std::string& where, const std::set<std::string>& allowed) {
  if (!n) return;
  if (!n.IsMap()) throw ConfigError(where + " must be a map");
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const YAML::Node& n, const char* key, T& out, const std::string& where) {
  const YAML::Node v = n[key];
  if (!v || v.IsNull()) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("bad value for " + where + "." + key + ": '" + scalar_text(v) + "'");
  }
}

template <typename T>
void read_opt(const YAML::Node& n, const char* key, std::optional<T>& out, const std::string& where) {
  const YAML::Node v = n[key];
  if (!v || v.IsNull()) return;
  T tmp{};
  read(n, key, tmp, where);
  out = tmp;
}

bool read_switch(const YAML::Node& n, const char* key, bool fallback, const std::string& where) {
  const YAML::Node v = n[key];
  if (!v || v.IsNull()) return fallback;
  const auto s = v.as<std::string>();
  if (s == "on" || s == "true" || s == "yes" || s == "1") return true;
  if (s == "off" || s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("bad value for " + where + "." + key + ": '" + s + "' (expected on|off)");
}

void parse_topology(const YAML::Node& n, DragonflyParams& p) {
  const std::string w = "topology";
  check_keys(n, w, {"groups", "switches_per_group", "endpoints_per_switch", "intra_links_per_pair",
                    "global_links_per_group_pair", "link_bandwidth_gbps", "global_bandwidth_taper",
                    "copper_propagation_ns", "optical_propagation_ns"});
  if (!n) return;
  read(n, "groups", p.num_groups, w);
  read(n, "switches_per_group", p.switches_per_group, w);
  read(n, "endpoints_per_switch", p.endpoints_per_switch, w);
  read(n, "intra_links_per_pair", p.intra_links_per_pair, w);
  read(n, "global_links_per_group_pair", p.global_links_per_group_pair, w);
  read(n, "link_bandwidth_gbps", p.link_bandwidth_gbps, w);
  read(n, "global_bandwidth_taper", p.global_bandwidth_taper, w);
  read(n, "copper_propagation_ns", p.copper_propagation_ns, w);
  read(n, "optical_propagation_ns", p.optical_propagation_ns, w);
}

TrafficClassSpec parse_class(const YAML::Node& n, std::size_t idx) {
  const std::string w = "qos.classes[" + std::to_string(idx) + "]";
  check_keys(n, w, {"id", "name", "dscp", "priority", "min_bw", "max_bw", "ordered", "lossless", "routing_bias"});
  TrafficClassSpec tc;
  tc.id = static_cast<ClassId>(idx);
  read(n, "id", tc.id, w);
  tc.name = "tc" + std::to_string(tc.id);
  read(n, "name", tc.name, w);
  if (const auto d = n["dscp"]; d && !d.IsNull()) {
    if (!d.IsSequence()) throw ConfigError(w + ".dscp must be a list");
    for (const auto& v : d) {
      const int x = v.as<int>();
      if (x < 0 || x > 63) throw ConfigError(w + ".dscp values must be 0..63");
      if (!tc.dscp_values.insert(static_cast<std::uint8_t>(x)).second) {
        throw ConfigError(w + ".dscp lists " + std::to_string(x) + " twice");
      }
    }
  }
  read(n, "priority", tc.priority, w);
  read(n, "min_bw", tc.min_bw, w);
  read(n, "max_bw", tc.max_bw, w);
  tc.ordered = read_switch(n, "ordered", tc.ordered, w);
  tc.lossless = read_switch(n, "lossless", tc.lossless, w);
  read_opt(n, "routing_bias", tc.routing_bias_override, w);
  return tc;
}

WorkloadSpec parse_workload(const YAML::Node& n, const std::string& w, const QosConfig& qos) {
  check_keys(n, w, {"kind", "msg_bytes", "iterations", "burst_size", "burst_gap_ns", "grid", "compute_ns", "ppn",
                    "tclass", "dscp", "rotate_target", "start_ns", "stop_ns"});
  WorkloadSpec s;
  if (!n["kind"]) throw ConfigError(w + ".kind is required");
  s.kind = parse_workload_kind(n["kind"].as<std::string>());
  read(n, "msg_bytes", s.msg_bytes, w);
  read(n, "iterations", s.iterations, w);
  read_opt(n, "burst_size", s.burst_size, w);
  read_opt(n, "burst_gap_ns", s.burst_gap_ns, w);
  if (const auto g = n["grid"]; g && !g.IsNull()) {
    if (!g.IsSequence() || g.size() != 3) throw ConfigError(w + ".grid must be a list of three sizes");
    s.grid = std::array<std::uint32_t, 3>{g[0].as<std::uint32_t>(), g[1].as<std::uint32_t>(), g[2].as<std::uint32_t>()};
  }
  read(n, "compute_ns", s.compute_ns, w);
  read(n, "ppn", s.ppn, w);
  s.tclass = qos.default_class;
  if (n["dscp"] && !n["dscp"].IsNull()) {
    const int d = n["dscp"].as<int>();
    if (d < 0 || d > 63) throw ConfigError(w + ".dscp must be 0..63");
    s.tclass = classify(qos, static_cast<std::uint8_t>(d));
  }
  read(n, "tclass", s.tclass, w);
  s.rotate_target = read_switch(n, "rotate_target", s.rotate_target, w);
  read(n, "start_ns", s.start_ns, w);
  read_opt(n, "stop_ns", s.stop_ns, w);
  return s;
}

}  // namespace

std::string scalar_text(const YAML::Node& n) {
  if (!n) return "";
  if (n.IsScalar()) return n.Scalar();
  YAML::Emitter e;
  e << YAML::Flow << n;
  return e.c_str();
}

ScenarioConfig parse_scenario(const YAML::Node& root, bool apply_env) {
  try {
    if (!root || !root.IsMap()) throw ConfigError("the scenario file must be a YAML map");
    check_keys(root, "the scenario", {"seed", "topology", "engine", "switch", "nic", "routing", "cc", "qos", "traffic",
                                      "harness", "outputs", "sweep"});
    ScenarioConfig c;
    read(root, "seed", c.seed, "root");
    parse_topology(root["topology"], c.topology);

    if (const auto n = root["engine"]) {
      check_keys(n, "engine", {"frame_mode"});
      if (n["frame_mode"]) c.network.frame_mode = parse_frame_mode(n["frame_mode"].as<std::string>());
    }
    if (const auto n = root["switch"]) {
      const std::string w = "switch";
      check_keys(n, w, {"traversal_min_ns", "traversal_max_ns", "request_ns", "grant_ns", "reference_wire_ns", "buffer_bytes"});
      read(n, "traversal_min_ns", c.network.latency.min_ns, w);
      read(n, "traversal_max_ns", c.network.latency.max_ns, w);
      read(n, "request_ns", c.network.latency.request_ns, w);
      read(n, "grant_ns", c.network.latency.grant_ns, w);
      read(n, "reference_wire_ns", c.network.latency.reference_wire_ns, w);
      read(n, "buffer_bytes", c.network.buffer_bytes, w);
    }
    if (const auto n = root["nic"]) {
      const std::string w = "nic";
      check_keys(n, w, {"message_overhead_ns", "ack_latency_per_switch_ns", "advert_interval_ns"});
      std::int64_t v = c.network.message_overhead.ns;
      read(n, "message_overhead_ns", v, w);
      c.network.message_overhead = SimTime{v};
      read(n, "ack_latency_per_switch_ns", c.network.ack_latency_per_switch_ns, w);
      v = c.network.advert_interval.ns;
      read(n, "advert_interval_ns", v, w);
      c.network.advert_interval = SimTime{v};
    }
    if (const auto n = root["routing"]) {
      const std::string w = "routing";
      check_keys(n, w, {"adaptive", "bias", "candidates"});
      c.network.routing.adaptive = read_switch(n, "adaptive", true, w);
      read_opt(n, "bias", c.network.routing.bias, w);
      if (const auto cand = n["candidates"]) {
        check_keys(cand, "routing.candidates", {"minimal", "nonminimal"});
        read(cand, "minimal", c.network.routing.minimal_candidates, "routing.candidates");
        read(cand, "nonminimal", c.network.routing.nonminimal_candidates, "routing.candidates");
      }
      if (c.network.routing.minimal_candidates + c.network.routing.nonminimal_candidates > 4) {
        throw ConfigError("routing.candidates allows at most four paths in total");
      }
    }
    if (const auto n = root["cc"]) {
      const std::string w = "cc";
      check_keys(n, w, {"enabled", "threshold_bdp_multiple", "base_rtt_ns", "decrease", "increase_frames", "tick_ns",
                        "default_window_frames"});
      auto& cc = c.network.cc;
      cc.enabled = read_switch(n, "enabled", true, w);
      read(n, "threshold_bdp_multiple", cc.threshold_bdp_multiple, w);
      read(n, "base_rtt_ns", cc.base_rtt_ns, w);
      read(n, "decrease", cc.decrease, w);
      read(n, "increase_frames", cc.increase_frames, w);
      std::int64_t tick = cc.tick.ns;
      read(n, "tick_ns", tick, w);
      cc.tick = SimTime{tick};
      read(n, "default_window_frames", cc.default_window_frames, w);
    }
    if (const auto n = root["qos"]) {
      check_keys(n, "qos", {"default_class", "classes"});
      if (const auto cls = n["classes"]) {
        if (!cls.IsSequence() || cls.size() == 0) throw ConfigError("qos.classes must be a non-empty list");
        c.network.qos.classes.clear();
        for (std::size_t i = 0; i < cls.size(); ++i) c.network.qos.classes.push_back(parse_class(cls[i], i));
        c.network.qos.default_class = c.network.qos.classes.front().id;
      }
      read(n, "default_class", c.network.qos.default_class, "qos");
    }
    try {
      validate(c.network.qos);
    } catch (const QosError& e) {
      throw ConfigError(std::string("qos: ") + e.what());
    }

    const auto t = root["traffic"];
    if (!t) throw ConfigError("the traffic section is required");
    check_keys(t, "traffic", {"allocation", "split", "victim", "aggressor"});
    if (t["allocation"]) c.allocation = parse_allocation(t["allocation"].as<std::string>());
    if (const auto s = t["split"]) {
      check_keys(s, "traffic.split", {"victim", "aggressor"});
      read(s, "victim", c.split.victim, "traffic.split");
      read(s, "aggressor", c.split.aggressor, "traffic.split");
    }
    if (!t["victim"]) throw ConfigError("traffic.victim is required");
    c.victim = parse_workload(t["victim"], "traffic.victim", c.network.qos);
    if (t["aggressor"] && !t["aggressor"].IsNull()) {
      c.aggressor = parse_workload(t["aggressor"], "traffic.aggressor", c.network.qos);
    }

    if (const auto n = root["harness"]) {
      const std::string w = "harness";
      check_keys(n, w, {"mode", "min_iterations", "min_victim_seconds", "time_scale", "ci_target", "max_iterations",
                        "bootstrap_resamples", "warmup_ns", "duration_ns", "series_window_ns"});
      auto& h = c.harness;
      if (n["mode"]) {
        const auto m = n["mode"].as<std::string>();
        if (m == "impact") {
          h.mode = HarnessConfig::Mode::Impact;
        } else if (m == "series") {
          h.mode = HarnessConfig::Mode::Series;
        } else {
          throw ConfigError("harness.mode must be impact|series");
        }
      }
      read(n, "min_iterations", h.min_iterations, w);
      read(n, "min_victim_seconds", h.min_victim_seconds, w);
      read(n, "time_scale", h.time_scale, w);
      read(n, "ci_target", h.ci_target, w);
      read(n, "max_iterations", h.max_iterations, w);
      read(n, "bootstrap_resamples", h.bootstrap_resamples, w);
      read(n, "warmup_ns", h.warmup_ns, w);
      read(n, "duration_ns", h.duration_ns, w);
      read(n, "series_window_ns", h.series_window_ns, w);
    }
    if (const auto n = root["outputs"]) {
      check_keys(n, "outputs", {"switch_trace", "window_log"});
      c.outputs.switch_trace = read_switch(n, "switch_trace", false, "outputs");
      c.outputs.window_log = read_switch(n, "window_log", false, "outputs");
    }
    if (const auto n = root["sweep"]) {
      check_keys(n, "sweep", {"axes"});
      parse_sweep_axes(root);
    }

    if (apply_env) {
      if (const char* env = std::getenv("SIM_TCLASS"); env && *env) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end == env || *end != '\0') throw ConfigError(std::string("SIM_TCLASS must be a class id, got '") + env + "'");
        c.victim.tclass = static_cast<ClassId>(v);
      }
    }
    validate(c);
    return c;
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const TopologyError& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  } catch (const QosError& e) {
    throw ConfigError(std::string("qos: ") + e.what());
  }
}

DragonflyParams parse_topology_section(const YAML::Node& root) {
  DragonflyParams p;
  try {
    if (!root || !root.IsMap()) throw ConfigError("the config file must be a YAML map");
    parse_topology(root["topology"], p);
    validate(p);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const TopologyError& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  }
  return p;
}

YAML::Node load_yaml_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return YAML::Load(in);
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path, bool apply_env) {
  return parse_scenario(load_yaml_file(path), apply_env);
}

namespace {
YAML::Node workload_yaml(const WorkloadSpec& s) {
  YAML::Node n;
  n["kind"] = to_string(s.kind);
  n["msg_bytes"] = s.msg_bytes;
  n["iterations"] = s.iterations;
  if (s.burst_size) n["burst_size"] = *s.burst_size;
  if (s.burst_gap_ns) n["burst_gap_ns"] = *s.burst_gap_ns;
  if (s.grid) {
    YAML::Node g;
    for (auto v : *s.grid) g.push_back(v);
    n["grid"] = g;
  }
  n["compute_ns"] = s.compute_ns;
  n["ppn"] = s.ppn;
  n["tclass"] = s.tclass;
  n["rotate_target"] = s.rotate_target;
  n["start_ns"] = s.start_ns;
  if (s.stop_ns) n["stop_ns"] = *s.stop_ns;
  return n;
}
}  // namespace

YAML::Node to_yaml(const ScenarioConfig& c) {
  YAML::Node r;
  r["seed"] = c.seed;
  auto& p = c.topology;
  YAML::Node t;
  t["groups"] = p.num_groups;
  t["switches_per_group"] = p.switches_per_group;
  t["endpoints_per_switch"] = p.endpoints_per_switch;
  t["intra_links_per_pair"] = p.intra_links_per_pair;
  t["global_links_per_group_pair"] = p.global_links_per_group_pair;
  t["link_bandwidth_gbps"] = p.link_bandwidth_gbps;
  t["global_bandwidth_taper"] = p.global_bandwidth_taper;
  t["copper_propagation_ns"] = p.copper_propagation_ns;
  t["optical_propagation_ns"] = p.optical_propagation_ns;
  r["topology"] = t;
  r["engine"]["frame_mode"] = to_string(c.network.frame_mode);
  const auto& l = c.network.latency;
  r["switch"]["traversal_min_ns"] = l.min_ns;
  r["switch"]["traversal_max_ns"] = l.max_ns;
  r["switch"]["request_ns"] = l.request_ns;
  r["switch"]["grant_ns"] = l.grant_ns;
  r["switch"]["reference_wire_ns"] = l.reference_wire_ns;
  r["switch"]["buffer_bytes"] = c.network.buffer_bytes;
  r["nic"]["message_overhead_ns"] = c.network.message_overhead.ns;
  r["nic"]["ack_latency_per_switch_ns"] = c.network.ack_latency_per_switch_ns;
  r["nic"]["advert_interval_ns"] = c.network.advert_interval.ns;
  const auto& ro = c.network.routing;
  r["routing"]["adaptive"] = ro.adaptive;
  if (ro.bias) {
    r["routing"]["bias"] = *ro.bias;
  } else {
    r["routing"]["bias"] = YAML::Node(YAML::NodeType::Null);
  }
  r["routing"]["candidates"]["minimal"] = ro.minimal_candidates;
  r["routing"]["candidates"]["nonminimal"] = ro.nonminimal_candidates;
  const auto& cc = c.network.cc;
  r["cc"]["enabled"] = cc.enabled;
  r["cc"]["threshold_bdp_multiple"] = cc.threshold_bdp_multiple;
  r["cc"]["base_rtt_ns"] = cc.base_rtt_ns;
  r["cc"]["decrease"] = cc.decrease;
  r["cc"]["increase_frames"] = cc.increase_frames;
  r["cc"]["tick_ns"] = cc.tick.ns;
  r["cc"]["default_window_frames"] = cc.default_window_frames;
  r["qos"]["default_class"] = c.network.qos.default_class;
  YAML::Node classes(YAML::NodeType::Sequence);
  for (const auto& tc : c.network.qos.classes) {
    YAML::Node n;
    n["id"] = tc.id;
    n["name"] = tc.name;
    YAML::Node d(YAML::NodeType::Sequence);
    for (auto v : tc.dscp_values) d.push_back(static_cast<int>(v));
    n["dscp"] = d;
    n["priority"] = tc.priority;
    n["min_bw"] = tc.min_bw;
    n["max_bw"] = tc.max_bw;
    n["ordered"] = tc.ordered;
    n["lossless"] = tc.lossless;
    if (tc.routing_bias_override) n["routing_bias"] = *tc.routing_bias_override;
    classes.push_back(n);
  }
  r["qos"]["classes"] = classes;
  r["traffic"]["allocation"] = to_string(c.allocation);
  r["traffic"]["split"]["victim"] = c.split.victim;
  r["traffic"]["split"]["aggressor"] = c.split.aggressor;
  r["traffic"]["victim"] = workload_yaml(c.victim);
  if (c.aggressor) r["traffic"]["aggressor"] = workload_yaml(*c.aggressor);
  const auto& h = c.harness;
  r["harness"]["mode"] = h.mode == HarnessConfig::Mode::Impact ? "impact" : "series";
  r["harness"]["min_iterations"] = h.min_iterations;
  r["harness"]["min_victim_seconds"] = h.min_victim_seconds;
  r["harness"]["time_scale"] = h.time_scale;
  r["harness"]["ci_target"] = h.ci_target;
  r["harness"]["max_iterations"] = h.max_iterations;
  r["harness"]["bootstrap_resamples"] = h.bootstrap_resamples;
  r["harness"]["warmup_ns"] = h.warmup_ns;
  r["harness"]["duration_ns"] = h.duration_ns;
  r["harness"]["series_window_ns"] = h.series_window_ns;
  r["outputs"]["switch_trace"] = c.outputs.switch_trace;
  r["outputs"]["window_log"] = c.outputs.window_log;
  return r;
}

std::string canonical_text(const ScenarioConfig& cfg) {
  YAML::Emitter e;
  e << to_yaml(cfg);
  return e.c_str();
}

void set_dotted(YAML::Node& root, const std::string& key, const YAML::Node& value) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("malformed dotted key '" + key + "'");
    parts.push_back(part);
  }
  if (parts.empty()) throw ConfigError("empty dotted key");
  // yaml-cpp node handles alias their targets, so descend through fresh handles on each step.
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node next = chain.back()[parts[i]];
    if (!next.IsDefined() || next.IsNull()) {
      chain.back()[parts[i]] = YAML::Node(YAML::NodeType::Map);
      next = chain.back()[parts[i]];
    }
    if (!next.IsMap()) throw ConfigError("dotted key '" + key + "' crosses a non-map value at '" + parts[i] + "'");
    chain.push_back(next);
  }
  chain.back()[parts.back()] = YAML::Clone(value);
}

std::vector<SweepAxis> parse_sweep_axes(const YAML::Node& root) {
  std::vector<SweepAxis> axes;
  const auto s = root["sweep"];
  if (!s || !s["axes"]) return axes;
  const auto a = s["axes"];
  if (!a.IsMap()) throw ConfigError("sweep.axes must map dotted keys to value lists");
  for (const auto& kv : a) {
    SweepAxis axis;
    axis.key = kv.first.as<std::string>();
    if (!kv.second.IsSequence() || kv.second.size() == 0) {
      throw ConfigError("sweep axis '" + axis.key + "' needs a non-empty list of values");
    }
    for (const auto& v : kv.second) axis.values.push_back(v);
    axes.push_back(std::move(axis));
  }
  return axes;
}

}  // namespace dflysim
