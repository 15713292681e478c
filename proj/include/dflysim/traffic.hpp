#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dflysim/core.hpp"

namespace dflysim {

enum class AllocationStrategy { Linear, Interleaved, Random };

AllocationStrategy parse_allocation(const std::string& s);
std::string to_string(AllocationStrategy s);

struct NodeSplit {
  std::uint32_t victim = 0;
  std::uint32_t aggressor = 0;
};

struct Allocation {
  std::vector<EndpointId> victim;
  std::vector<EndpointId> aggressor;
};

// Places the two jobs on endpoints 0..n-1. Interleaved repeats a pattern of (v + a) / gcd(v, a)
// nodes with the victim slots spread evenly inside it.
Allocation allocate_nodes(AllocationStrategy strategy, NodeSplit split, std::uint32_t n_endpoints, std::uint64_t seed);

enum class WorkloadKind { Incast, BurstyIncast, Alltoall, Allreduce, Pingpong, BisectionStream, Halo3d };

WorkloadKind parse_workload_kind(const std::string& s);
std::string to_string(WorkloadKind k);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::Allreduce;
  std::uint64_t msg_bytes = 8;
  std::uint64_t iterations = 0;  // 0: repeat until the harness stops the run
  std::optional<std::uint64_t> burst_size;
  std::optional<std::int64_t> burst_gap_ns;
  std::optional<std::array<std::uint32_t, 3>> grid;
  std::int64_t compute_ns = 0;  // idle time at the start of every iteration
  std::uint32_t ppn = 1;
  ClassId tclass = 0;
  bool rotate_target = false;   // incast kinds: move the target every iteration
  std::int64_t start_ns = 0;
  std::optional<std::int64_t> stop_ns;  // no new messages are posted after this time
};

// Throws ConfigError when kind-specific fields are missing or inconsistent with `ranks`.
void validate(const WorkloadSpec& spec, std::uint32_t ranks);

// Packets needed for a message: ceil(bytes / 4096), and one header-only packet for 0 bytes.
std::uint32_t segment_count(std::uint64_t msg_bytes);
// Payload of packet `index`; all full except the last, which carries the remainder.
std::uint32_t segment_payload(std::uint64_t msg_bytes, std::uint32_t index);

struct Transfer {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint64_t bytes = 0;
  friend bool operator==(const Transfer&, const Transfer&) = default;
};
using Round = std::vector<Transfer>;

// Ring-shifted pairwise exchange: round r pairs i -> (i + r) mod P.
std::vector<Round> alltoall_rounds(std::uint32_t P, std::uint64_t msg_bytes);
// Recursive doubling; for P not a power of two, the first 2*(P - p2) ranks fold pairwise in a pre
// round and receive the result in a post round.
std::vector<Round> allreduce_rounds(std::uint32_t P, std::uint64_t msg_bytes);
// Face exchanges of a non-periodic 3D stencil; rank = x + X * (y + Y * z).
Round halo3d_exchanges(const std::array<std::uint32_t, 3>& grid, std::uint64_t msg_bytes);

// One rank's share of an iteration: post the sends (each `repeat` times back to back), wait for
// one message from every listed peer, then idle for `delay_after_ns`.
struct Step {
  std::uint32_t round = 0;  // position in the global schedule; matches sends to receives
  std::vector<std::pair<std::uint32_t, std::uint64_t>> sends;
  std::vector<std::uint32_t> recvs;
  std::uint64_t repeat = 1;
  std::int64_t delay_after_ns = 0;
  bool synchronous = false;  // a send completes when the peer has received it, not when it leaves
};

// Steps rank `rank` of `P` executes during `iteration`. Ranks with no steps are passive receivers.
std::vector<Step> build_program(const WorkloadSpec& spec, std::uint32_t P, std::uint32_t rank, std::uint64_t iteration);

// Target rank of the incast kinds for a given iteration.
std::uint32_t incast_target(const WorkloadSpec& spec, std::uint32_t P, std::uint64_t iteration);

}  // namespace dflysim
