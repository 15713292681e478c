#include "dflysim/traffic.hpp"

#include <algorithm>
#include <bit>
#include <numeric>

namespace dflysim {

AllocationStrategy parse_allocation(const std::string& s) {
  if (s == "linear") return AllocationStrategy::Linear;
  if (s == "interleaved") return AllocationStrategy::Interleaved;
  if (s == "random") return AllocationStrategy::Random;
  throw ConfigError("unknown allocation '" + s + "' (expected linear|interleaved|random)");
}

std::string to_string(AllocationStrategy s) {
  switch (s) {
    case AllocationStrategy::Linear: return "linear";
    case AllocationStrategy::Interleaved: return "interleaved";
    case AllocationStrategy::Random: return "random";
  }
  return "?";
}

Allocation allocate_nodes(AllocationStrategy strategy, NodeSplit split, std::uint32_t n_endpoints, std::uint64_t seed) {
  const std::uint64_t total = static_cast<std::uint64_t>(split.victim) + split.aggressor;
  if (total > n_endpoints) {
    throw ConfigError("split of " + std::to_string(split.victim) + "+" + std::to_string(split.aggressor) +
                      " nodes exceeds the " + std::to_string(n_endpoints) + " endpoints available");
  }
  Allocation a;
  a.victim.reserve(split.victim);
  a.aggressor.reserve(split.aggressor);
  switch (strategy) {
    case AllocationStrategy::Linear:
      for (std::uint32_t i = 0; i < split.victim; ++i) a.victim.push_back(i);
      for (std::uint32_t i = 0; i < split.aggressor; ++i) a.aggressor.push_back(split.victim + i);
      break;
    case AllocationStrategy::Interleaved: {
      if (split.victim == 0 || split.aggressor == 0) {
        return allocate_nodes(AllocationStrategy::Linear, split, n_endpoints, seed);
      }
      const std::uint32_t g = std::gcd(split.victim, split.aggressor);
      const std::uint32_t v = split.victim / g;
      const std::uint32_t ag = split.aggressor / g;
      // Victim slots are spread evenly over each period of v + ag nodes; slot 0 is always a victim.
      for (std::uint32_t node = 0; node < total; ++node) {
        const std::uint64_t slot = node % (v + ag);
        ((slot * v) % (v + ag) < v ? a.victim : a.aggressor).push_back(node);
      }
      break;
    }
    case AllocationStrategy::Random: {
      std::vector<EndpointId> ids(n_endpoints);
      std::iota(ids.begin(), ids.end(), 0U);
      Rng rng(derive_seed(seed, 0xa11c, 0));
      for (std::uint32_t i = n_endpoints; i > 1; --i) std::swap(ids[i - 1], ids[uniform_below(rng, i)]);
      a.victim.assign(ids.begin(), ids.begin() + split.victim);
      a.aggressor.assign(ids.begin() + split.victim, ids.begin() + static_cast<std::ptrdiff_t>(total));
      break;
    }
  }
  return a;
}

WorkloadKind parse_workload_kind(const std::string& s) {
  if (s == "incast") return WorkloadKind::Incast;
  if (s == "bursty_incast") return WorkloadKind::BurstyIncast;
  if (s == "alltoall") return WorkloadKind::Alltoall;
  if (s == "allreduce") return WorkloadKind::Allreduce;
  if (s == "pingpong") return WorkloadKind::Pingpong;
  if (s == "bisection_stream") return WorkloadKind::BisectionStream;
  if (s == "halo3d") return WorkloadKind::Halo3d;
  throw ConfigError("unknown workload kind '" + s + "'");
}

std::string to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::Incast: return "incast";
    case WorkloadKind::BurstyIncast: return "bursty_incast";
    case WorkloadKind::Alltoall: return "alltoall";
    case WorkloadKind::Allreduce: return "allreduce";
    case WorkloadKind::Pingpong: return "pingpong";
    case WorkloadKind::BisectionStream: return "bisection_stream";
    case WorkloadKind::Halo3d: return "halo3d";
  }
  return "?";
}

void validate(const WorkloadSpec& spec, std::uint32_t ranks) {
  const std::string k = to_string(spec.kind);
  if (spec.ppn == 0) throw ConfigError(k + ": ppn must be >= 1");
  if ((spec.burst_size || spec.burst_gap_ns) && spec.kind != WorkloadKind::BurstyIncast) {
    throw ConfigError(k + ": burst_size/burst_gap_ns only apply to bursty_incast");
  }
  if (spec.grid && spec.kind != WorkloadKind::Halo3d) throw ConfigError(k + ": grid only applies to halo3d");
  if (spec.compute_ns < 0 || spec.start_ns < 0) throw ConfigError(k + ": times must be non-negative");
  switch (spec.kind) {
    case WorkloadKind::BurstyIncast:
      if (!spec.burst_size || *spec.burst_size == 0) throw ConfigError("bursty_incast needs burst_size >= 1");
      if (!spec.burst_gap_ns || *spec.burst_gap_ns < 0) throw ConfigError("bursty_incast needs burst_gap_ns >= 0");
      [[fallthrough]];
    case WorkloadKind::Incast:
      if (ranks < 2) throw ConfigError(k + " needs at least 2 nodes");
      break;
    case WorkloadKind::Alltoall:
    case WorkloadKind::Allreduce:
    case WorkloadKind::BisectionStream:
      if (ranks < 2) throw ConfigError(k + " needs at least 2 nodes");
      if (spec.kind == WorkloadKind::BisectionStream && ranks % 2 != 0) {
        throw ConfigError("bisection_stream needs an even node count");
      }
      break;
    case WorkloadKind::Pingpong:
      if (ranks != 2) throw ConfigError("pingpong needs exactly 2 nodes");
      break;
    case WorkloadKind::Halo3d: {
      if (!spec.grid) throw ConfigError("halo3d needs a grid");
      const auto& g = *spec.grid;
      if (static_cast<std::uint64_t>(g[0]) * g[1] * g[2] != ranks) {
        throw ConfigError("halo3d grid " + std::to_string(g[0]) + "x" + std::to_string(g[1]) + "x" +
                          std::to_string(g[2]) + " does not match " + std::to_string(ranks) + " nodes");
      }
      break;
    }
  }
}

std::uint32_t segment_count(std::uint64_t msg_bytes) {
  if (msg_bytes == 0) return 1;
  return static_cast<std::uint32_t>((msg_bytes + kMaxPayloadBytes - 1) / kMaxPayloadBytes);
}

std::uint32_t segment_payload(std::uint64_t msg_bytes, std::uint32_t index) {
  const std::uint64_t start = static_cast<std::uint64_t>(index) * kMaxPayloadBytes;
  if (start >= msg_bytes) return 0;
  return static_cast<std::uint32_t>(std::min<std::uint64_t>(kMaxPayloadBytes, msg_bytes - start));
}

std::vector<Round> alltoall_rounds(std::uint32_t P, std::uint64_t msg_bytes) {
  std::vector<Round> rounds;
  for (std::uint32_t r = 1; r < P; ++r) {
    Round round;
    for (std::uint32_t i = 0; i < P; ++i) round.push_back(Transfer{i, (i + r) % P, msg_bytes});
    rounds.push_back(std::move(round));
  }
  return rounds;
}

std::vector<Round> allreduce_rounds(std::uint32_t P, std::uint64_t msg_bytes) {
  std::vector<Round> rounds;
  if (P < 2) return rounds;
  const std::uint32_t p2 = std::bit_floor(P);
  const std::uint32_t rem = P - p2;
  // Survivors after folding, renumbered 0..p2-1.
  auto real = [rem](std::uint32_t nr) { return nr < rem ? 2 * nr + 1 : nr + rem; };
  if (rem > 0) {
    Round pre;
    for (std::uint32_t i = 0; i < rem; ++i) pre.push_back(Transfer{2 * i, 2 * i + 1, msg_bytes});
    rounds.push_back(std::move(pre));
  }
  for (std::uint32_t mask = 1; mask < p2; mask <<= 1) {
    Round round;
    for (std::uint32_t nr = 0; nr < p2; ++nr) round.push_back(Transfer{real(nr), real(nr ^ mask), msg_bytes});
    rounds.push_back(std::move(round));
  }
  if (rem > 0) {
    Round post;
    for (std::uint32_t i = 0; i < rem; ++i) post.push_back(Transfer{2 * i + 1, 2 * i, msg_bytes});
    rounds.push_back(std::move(post));
  }
  return rounds;
}

Round halo3d_exchanges(const std::array<std::uint32_t, 3>& grid, std::uint64_t msg_bytes) {
  Round out;
  const auto [X, Y, Z] = grid;
  for (std::uint32_t z = 0; z < Z; ++z) {
    for (std::uint32_t y = 0; y < Y; ++y) {
      for (std::uint32_t x = 0; x < X; ++x) {
        const std::uint32_t me = x + X * (y + Y * z);
        auto add = [&](std::uint32_t nx, std::uint32_t ny, std::uint32_t nz) {
          out.push_back(Transfer{me, nx + X * (ny + Y * nz), msg_bytes});
        };
        if (x > 0) add(x - 1, y, z);
        if (x + 1 < X) add(x + 1, y, z);
        if (y > 0) add(x, y - 1, z);
        if (y + 1 < Y) add(x, y + 1, z);
        if (z > 0) add(x, y, z - 1);
        if (z + 1 < Z) add(x, y, z + 1);
      }
    }
  }
  return out;
}

std::uint32_t incast_target(const WorkloadSpec& spec, std::uint32_t P, std::uint64_t iteration) {
  return spec.rotate_target ? static_cast<std::uint32_t>(iteration % P) : 0;
}

namespace {

// Converts a global round list into one rank's steps.
std::vector<Step> steps_from_rounds(const std::vector<Round>& rounds, std::uint32_t rank) {
  std::vector<Step> steps;
  for (std::uint32_t r = 0; r < rounds.size(); ++r) {
    const auto& round = rounds[r];
    Step s;
    s.round = r;
    for (const auto& t : round) {
      if (t.src == rank) s.sends.emplace_back(t.dst, t.bytes);
      if (t.dst == rank) s.recvs.push_back(t.src);
    }
    if (!s.sends.empty() || !s.recvs.empty()) steps.push_back(std::move(s));
  }
  return steps;
}

}  // namespace

std::vector<Step> build_program(const WorkloadSpec& spec, std::uint32_t P, std::uint32_t rank, std::uint64_t iteration) {
  std::vector<Step> steps;
  switch (spec.kind) {
    case WorkloadKind::Incast:
    case WorkloadKind::BurstyIncast: {
      const std::uint32_t target = incast_target(spec, P, iteration);
      if (rank == target) break;
      Step s;
      s.sends.emplace_back(target, spec.msg_bytes);
      s.synchronous = true;
      if (spec.kind == WorkloadKind::BurstyIncast) {
        s.repeat = spec.burst_size.value_or(1);
        s.delay_after_ns = spec.burst_gap_ns.value_or(0);
      }
      steps.push_back(std::move(s));
      break;
    }
    case WorkloadKind::Alltoall: {
      // Every send is posted at once in ring-shift order; the NIC interleaves them packet by
      // packet. Waiting on each shift would turn every round into a group permutation.
      Step s;
      for (std::uint32_t r = 1; r < P; ++r) {
        s.sends.emplace_back((rank + r) % P, spec.msg_bytes);
        s.recvs.push_back((rank + P - r) % P);
      }
      steps.push_back(std::move(s));
      break;
    }
    case WorkloadKind::Allreduce:
      steps = steps_from_rounds(allreduce_rounds(P, spec.msg_bytes), rank);
      break;
    case WorkloadKind::Pingpong:
      steps = steps_from_rounds({Round{Transfer{0, 1, spec.msg_bytes}}, Round{Transfer{1, 0, spec.msg_bytes}}}, rank);
      break;
    case WorkloadKind::BisectionStream: {
      const std::uint32_t half = P / 2;
      if (rank < half) {
        Step s;
        s.sends.emplace_back(rank + half, spec.msg_bytes);
        steps.push_back(std::move(s));
      }
      break;
    }
    case WorkloadKind::Halo3d:
      steps = steps_from_rounds({halo3d_exchanges(*spec.grid, spec.msg_bytes)}, rank);
      break;
  }
  return steps;
}

}  // namespace dflysim
