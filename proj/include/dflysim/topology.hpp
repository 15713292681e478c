#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dflysim/core.hpp"
#include "dflysim/engine.hpp"

namespace dflysim {

inline constexpr std::uint32_t kSwitchRadix = 64;

struct DragonflyParams {
  std::uint32_t num_groups = 2;
  std::uint32_t switches_per_group = 2;
  std::uint32_t endpoints_per_switch = 16;
  std::uint32_t intra_links_per_pair = 1;
  std::uint32_t global_links_per_group_pair = 1;
  double link_bandwidth_gbps = 200.0;
  double global_bandwidth_taper = 1.0;  // fraction of link bandwidth provisioned on global links
  double copper_propagation_ns = 10.0;
  double optical_propagation_ns = 250.0;
  std::uint32_t radix = kSwitchRadix;
};

class TopologyError : public std::runtime_error {
 public:
  enum class Kind { InvalidParams, PortBudgetExceeded, AsymmetricGlobal, OddPartition, ParseError };
  TopologyError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class PeerKind : std::uint8_t { Unused, Nic, Switch };

struct PortInfo {
  PeerKind peer = PeerKind::Unused;
  std::uint32_t peer_id = kInvalidId;  // endpoint or switch id
  PortId peer_port = 0;                // port on the peer switch (switch peers only)
  LinkId link = kInvalidId;
};

struct SwitchInfo {
  std::uint32_t group = 0;
  std::uint32_t index_in_group = 0;
  std::vector<PortInfo> ports;  // size == ports in use, lowest-numbered first
};

struct EndpointInfo {
  SwitchId home_switch = 0;
  PortId port = 0;
  LinkId link = kInvalidId;
};

enum class PathClass : std::uint8_t { Minimal, Nonminimal };

// Switch-level route: switches[0] is the source switch; out_ports[k] leaves switches[k] toward
// switches[k + 1]. Parallel links show up as distinct out ports.
struct Path {
  std::vector<SwitchId> switches;
  std::vector<PortId> out_ports;
  PathClass cls = PathClass::Minimal;

  [[nodiscard]] std::size_t hops() const { return out_ports.size(); }
  friend bool operator==(const Path&, const Path&) = default;
  friend auto operator<=>(const Path& x, const Path& y) {
    if (auto c = x.switches <=> y.switches; c != 0) return c;
    return x.out_ports <=> y.out_ports;
  }
};

class Topology {
 public:
  Topology() = default;

  [[nodiscard]] const DragonflyParams& params() const { return params_; }
  [[nodiscard]] std::uint32_t num_switches() const { return static_cast<std::uint32_t>(switches_.size()); }
  [[nodiscard]] std::uint32_t num_endpoints() const { return static_cast<std::uint32_t>(endpoints_.size()); }
  [[nodiscard]] std::uint32_t num_groups() const { return params_.num_groups; }
  [[nodiscard]] const std::vector<Link>& links() const { return links_; }
  [[nodiscard]] const Link& link(LinkId id) const { return links_.at(id); }
  [[nodiscard]] const SwitchInfo& switch_info(SwitchId s) const { return switches_.at(s); }
  [[nodiscard]] const EndpointInfo& endpoint(EndpointId e) const { return endpoints_.at(e); }
  [[nodiscard]] std::uint32_t group_of(SwitchId s) const { return switches_[s].group; }
  [[nodiscard]] SwitchId switch_of(EndpointId e) const { return endpoints_[e].home_switch; }
  [[nodiscard]] SwitchId switch_at(std::uint32_t group, std::uint32_t index) const {
    return group * params_.switches_per_group + index;
  }
  [[nodiscard]] std::size_t ports_used(SwitchId s) const { return switches_[s].ports.size(); }
  [[nodiscard]] std::size_t count_links(Medium m, bool host_links) const;

  // Every switch-to-switch out port of `s` that reaches `t` directly.
  [[nodiscard]] std::vector<PortId> ports_toward(SwitchId s, SwitchId t) const;
  // Switch-level hop count from every switch to `target` (BFS).
  [[nodiscard]] std::vector<std::uint32_t> distances_to(SwitchId target) const;

  friend Topology build_dragonfly(const DragonflyParams& params);
  friend Topology import_adjacency(std::istream& in);

 private:
  LinkId add_link(Medium m, double gbps, double prop_ns, LinkEnd a, LinkEnd b);

  DragonflyParams params_;
  std::vector<SwitchInfo> switches_;
  std::vector<EndpointInfo> endpoints_;
  std::vector<Link> links_;
};

void validate(const DragonflyParams& params);
Topology build_dragonfly(const DragonflyParams& params);

struct SystemSize {
  std::uint32_t switches_per_group = 0;
  std::uint32_t global_ports_per_switch = 0;
  std::uint64_t groups = 0;
  std::uint64_t endpoints = 0;
  friend bool operator==(const SystemSize&, const SystemSize&) = default;
};

// Largest single-dimension dragonfly buildable from one switch radix with fully connected groups.
SystemSize max_system(std::uint32_t radix, std::uint32_t endpoints_per_switch,
                      std::optional<std::uint64_t> addressing_limit = std::nullopt);

// The DragonflyParams realizing max_system (one global link per group pair).
DragonflyParams max_system_params(std::uint32_t radix, std::uint32_t endpoints_per_switch,
                                  std::optional<std::uint64_t> addressing_limit = std::nullopt);

std::vector<Path> minimal_switch_paths(const Topology& topo, SwitchId src, SwitchId dst);
std::vector<Path> minimal_paths(const Topology& topo, EndpointId src, EndpointId dst);

// Up to k one-intermediate detours, sampled with `rng`. Intra-group pairs detour through another
// switch of the group; inter-group pairs through a group other than source and destination.
std::vector<Path> nonminimal_switch_paths(const Topology& topo, SwitchId src, SwitchId dst, std::size_t k,
                                          Rng& rng);
std::vector<Path> nonminimal_paths(const Topology& topo, EndpointId src, EndpointId dst, std::size_t k, Rng& rng);

// Peak bidirectional bandwidth across the cut separating `half_a` from the remaining groups, in Gb/s.
double bisection_bound(const Topology& topo, const std::vector<std::uint32_t>& half_a);
// Bisection with the first half of the groups on one side (all balanced cuts are equal by symmetry).
double bisection_bound(const Topology& topo);
// Peak all-to-all bandwidth limited by global links, in Gb/s.
double all_to_all_bound(const Topology& topo);

std::uint32_t switch_diameter(const Topology& topo);

// Plain-text adjacency: one line per link, `type a b bandwidth`, with `S<switch>:<port>` and
// `N<endpoint>` ends; header lines start with '#'.
void export_adjacency(const Topology& topo, std::ostream& out);
Topology import_adjacency(std::istream& in);

}  // namespace dflysim
