#pragma once

#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "dflysim/harness.hpp"

namespace dflysim {

// Parses a scenario document. Unknown keys and malformed values raise ConfigError. When
// `apply_env` is set, SIM_TCLASS (a class id) replaces the victim's traffic class.
ScenarioConfig parse_scenario(const YAML::Node& root, bool apply_env = true);
// Only the `topology` section of a document; other sections are ignored.
DragonflyParams parse_topology_section(const YAML::Node& root);
YAML::Node load_yaml_file(const std::string& path);
ScenarioConfig load_scenario(const std::string& path, bool apply_env = true);

// Canonical, fully populated echo of a scenario (every default spelled out).
YAML::Node to_yaml(const ScenarioConfig& cfg);
std::string canonical_text(const ScenarioConfig& cfg);

// Sets `a.b.c` inside `root`, creating intermediate maps.
void set_dotted(YAML::Node& root, const std::string& key, const YAML::Node& value);

struct SweepAxis {
  std::string key;
  std::vector<YAML::Node> values;
};

// The optional `sweep.axes` map: dotted key -> list of values, in document order.
std::vector<SweepAxis> parse_sweep_axes(const YAML::Node& root);

std::string scalar_text(const YAML::Node& n);

}  // namespace dflysim
