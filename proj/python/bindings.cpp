#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "dflysim/config.hpp"
#include "dflysim/harness.hpp"
#include "dflysim/report.hpp"
#include "dflysim/topology.hpp"

namespace py = pybind11;
using namespace dflysim;

namespace {

ScenarioConfig scenario(const std::string& yaml, bool apply_env) {
  return parse_scenario(YAML::Load(yaml), apply_env);
}

py::dict report_dict(const CongestionReport& r) {
  py::dict d;
  d["t_isolated_ns"] = r.t_isolated;
  d["t_contended_ns"] = r.t_contended;
  d["impact"] = r.impact;
  d["unstable"] = r.unstable;
  d["isolated_samples"] = r.isolated.samples;
  d["contended_samples"] = r.contended.samples;
  d["p95_ns"] = r.contended.p95;
  d["p99_ns"] = r.contended.p99;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Packet-level dragonfly network simulator";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<TopologyError>(m, "TopologyError", PyExc_ValueError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

  py::class_<DragonflyParams>(m, "DragonflyParams")
      .def(py::init<>())
      .def_readwrite("num_groups", &DragonflyParams::num_groups)
      .def_readwrite("switches_per_group", &DragonflyParams::switches_per_group)
      .def_readwrite("endpoints_per_switch", &DragonflyParams::endpoints_per_switch)
      .def_readwrite("intra_links_per_pair", &DragonflyParams::intra_links_per_pair)
      .def_readwrite("global_links_per_group_pair", &DragonflyParams::global_links_per_group_pair)
      .def_readwrite("link_bandwidth_gbps", &DragonflyParams::link_bandwidth_gbps)
      .def_readwrite("global_bandwidth_taper", &DragonflyParams::global_bandwidth_taper)
      .def_readwrite("radix", &DragonflyParams::radix)
      .def("validate", [](const DragonflyParams& p) { validate(p); });

  py::class_<Topology>(m, "Topology")
      .def_property_readonly("num_groups", &Topology::num_groups)
      .def_property_readonly("num_switches", &Topology::num_switches)
      .def_property_readonly("num_endpoints", &Topology::num_endpoints)
      .def("switch_of", &Topology::switch_of)
      .def("diameter", [](const Topology& t) { return switch_diameter(t); })
      .def("bisection_bound", [](const Topology& t) { return bisection_bound(t); }, "Gb/s across a balanced group cut")
      .def("all_to_all_bound", [](const Topology& t) { return all_to_all_bound(t); }, "Gb/s")
      .def(
          "minimal_paths",
          [](const Topology& t, EndpointId a, EndpointId b) {
            std::vector<std::vector<SwitchId>> out;
            for (const auto& p : minimal_paths(t, a, b)) out.push_back(p.switches);
            return out;
          },
          "Switch sequences of every minimal route between two endpoints")
      .def("adjacency", [](const Topology& t) {
        std::ostringstream s;
        export_adjacency(t, s);
        return s.str();
      });

  m.def("build_dragonfly", &build_dragonfly, py::arg("params"));

  m.def(
      "max_system",
      [](std::uint32_t radix, std::uint32_t eps, std::optional<std::uint64_t> limit) {
        const auto s = max_system(radix, eps, limit);
        py::dict d;
        d["groups"] = s.groups;
        d["endpoints"] = s.endpoints;
        d["global_ports_per_switch"] = s.global_ports_per_switch;
        return d;
      },
      py::arg("radix") = 64, py::arg("endpoints_per_switch") = 16, py::arg("addressing_limit") = py::none());

  m.def(
      "validate_config", [](const std::string& yaml, bool env) { validate(scenario(yaml, env)); }, py::arg("yaml"),
      py::arg("apply_env") = false);
  m.def(
      "canonical_config", [](const std::string& yaml, bool env) { return canonical_text(scenario(yaml, env)); },
      py::arg("yaml"), py::arg("apply_env") = false);

  m.def(
      "run_congestion",
      [](const std::string& yaml, bool env) {
        const auto cfg = scenario(yaml, env);
        CongestionReport r;
        {
          py::gil_scoped_release nogil;
          r = run_congestion(cfg);
        }
        return report_dict(r);
      },
      py::arg("yaml"), py::arg("apply_env") = false, "Isolated and contended victim runs; returns the impact report");

  m.def(
      "run_series",
      [](const std::string& yaml, bool env) {
        const auto cfg = scenario(yaml, env);
        RunResult r;
        {
          py::gil_scoped_release nogil;
          r = run_series(cfg);
        }
        py::dict d;
        d["window_ns"] = cfg.harness.series_window_ns;
        d["bytes"] = r.series;
        d["packets_injected"] = r.counters.packets_injected;
        d["packets_delivered"] = r.counters.packets_delivered;
        d["packets_in_flight"] = r.packets_in_flight;
        d["packets_dropped"] = r.counters.packets_dropped;
        return d;
      },
      py::arg("yaml"), py::arg("apply_env") = false, "Per-job delivered bytes per window");

  m.def(
      "run_sweep",
      [](const std::string& yaml, unsigned jobs) {
        const auto base = YAML::Load(yaml);
        const auto axes = parse_sweep_axes(base);
        std::ostringstream csv;
        {
          py::gil_scoped_release nogil;
          emit_csv(csv, run_sweep(base, axes, jobs).table);
        }
        return csv.str();
      },
      py::arg("yaml"), py::arg("jobs") = 1, "Runs every cell of the sweep section; returns the report CSV");
}
