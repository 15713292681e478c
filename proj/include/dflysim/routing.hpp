#pragma once

#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "dflysim/core.hpp"
#include "dflysim/topology.hpp"

namespace dflysim {

struct RoutingConfig {
  bool adaptive = true;
  std::optional<double> bias;  // bytes per extra hop; unset means one maximum frame
  std::uint32_t minimal_candidates = 2;
  std::uint32_t nonminimal_candidates = 2;
};

// Per-switch congestion view: exact local output depths plus depths that neighbors advertised on
// link-level acks, each tagged with the time it was sampled.
class CongestionTable {
 public:
  CongestionTable() = default;
  explicit CongestionTable(std::size_t num_ports);

  void add_local(PortId port, std::int64_t delta_bytes);
  [[nodiscard]] std::uint64_t local(PortId port) const { return local_[port]; }
  [[nodiscard]] const std::vector<std::uint64_t>& local_depths() const { return local_; }

  // Overwrites what `neighbor_port` advertised if `stamp` is newer than the stored snapshot.
  // Returns false for stale snapshots. Each accepted or rejected snapshot is charged the
  // reverse-direction overhead.
  bool on_ack_info(PortId neighbor_port, const std::vector<std::uint64_t>& depths, SimTime stamp);

  // Depth the neighbor on `neighbor_port` reported for its own output `their_port`; 0 if unknown.
  [[nodiscard]] std::uint64_t remote(PortId neighbor_port, PortId their_port) const;
  [[nodiscard]] std::optional<SimTime> remote_stamp(PortId neighbor_port) const;
  [[nodiscard]] std::uint64_t reverse_overhead_bytes() const { return reverse_bytes_; }

  static constexpr std::uint32_t kAdvertBytes = 4;

 private:
  struct Remote {
    bool valid = false;
    SimTime stamp{};
    std::vector<std::uint64_t> depths;
  };
  std::vector<std::uint64_t> local_;
  std::vector<Remote> remote_;
  std::uint64_t reverse_bytes_ = 0;
};

struct PathCandidate {
  Path path;
  PathClass length_class = PathClass::Minimal;
  std::uint32_t extra_hops = 0;  // hops beyond the shortest route
  double congestion = 0.0;       // queued bytes at the first hop plus advertised depth at the second
};

double score(const PathCandidate& c, double bias);

// Index of the winning candidate: lowest score, then minimal before nonminimal, then the
// lexicographically smallest switch sequence. `bias_per_hop` is scaled by each candidate's extra hops.
std::size_t select(const std::vector<PathCandidate>& cands, double bias_per_hop);

// Per-source-switch routing decisions with cached path sets.
class Router {
 public:
  Router(const Topology& topo, RoutingConfig cfg, std::uint32_t max_frame_bytes);

  // Up to `minimal_candidates` minimal paths and `nonminimal_candidates` sampled detours, scored
  // against `tables` (indexed by switch).
  std::vector<PathCandidate> candidates(const std::vector<CongestionTable>& tables, SwitchId src_switch,
                                        SwitchId dst_switch, Rng& rng);

  // Full decision for one packet. Ordered traffic and non-adaptive routing use a flow hash over the
  // minimal set; otherwise candidates are scored and the best one wins.
  Path route(const std::vector<CongestionTable>& tables, SwitchId src_switch, SwitchId dst_switch,
             std::uint64_t flow_hash, bool ordered, std::optional<double> bias_override, Rng& rng);

  const std::vector<Path>& minimal(SwitchId src, SwitchId dst);
  [[nodiscard]] double default_bias() const { return bias_; }
  [[nodiscard]] const RoutingConfig& config() const { return cfg_; }
  [[nodiscard]] std::uint64_t nonminimal_chosen() const { return nonminimal_chosen_; }
  [[nodiscard]] std::uint64_t decisions() const { return decisions_; }

  // One random detour (intermediate switch inside the group, or intermediate group).
  std::optional<Path> sample_nonminimal(SwitchId src, SwitchId dst, Rng& rng);

 private:
  struct GlobalPort {
    SwitchId sw;
    PortId port;
  };
  void hop(Path& path, SwitchId next, Rng& rng) const;
  double congestion_of(const std::vector<CongestionTable>& tables, const Path& p) const;

  const Topology* topo_;
  RoutingConfig cfg_;
  double bias_;
  std::uint32_t groups_;
  std::vector<std::vector<GlobalPort>> global_;                       // [g * G + h]
  std::vector<std::vector<PortId>> local_;                            // [s * S + index_in_group]
  std::unordered_map<std::uint64_t, std::vector<Path>> minimal_cache_;
  std::uint64_t nonminimal_chosen_ = 0;
  std::uint64_t decisions_ = 0;
};

}  // namespace dflysim
