#include "dflysim/routing.hpp"

#include <algorithm>
#include <limits>

namespace dflysim {

CongestionTable::CongestionTable(std::size_t num_ports) : local_(num_ports, 0), remote_(num_ports) {}

void CongestionTable::add_local(PortId port, std::int64_t delta_bytes) {
  local_[port] = static_cast<std::uint64_t>(static_cast<std::int64_t>(local_[port]) + delta_bytes);
}

bool CongestionTable::on_ack_info(PortId neighbor_port, const std::vector<std::uint64_t>& depths, SimTime stamp) {
  reverse_bytes_ += kAdvertBytes;
  auto& r = remote_.at(neighbor_port);
  if (r.valid && stamp < r.stamp) return false;
  r.valid = true;
  r.stamp = stamp;
  r.depths = depths;
  return true;
}

std::uint64_t CongestionTable::remote(PortId neighbor_port, PortId their_port) const {
  const auto& r = remote_.at(neighbor_port);
  if (!r.valid || their_port >= r.depths.size()) return 0;
  return r.depths[their_port];
}

std::optional<SimTime> CongestionTable::remote_stamp(PortId neighbor_port) const {
  const auto& r = remote_.at(neighbor_port);
  if (!r.valid) return std::nullopt;
  return r.stamp;
}

double score(const PathCandidate& c, double bias) {
  return c.congestion + (c.length_class == PathClass::Nonminimal ? bias : 0.0);
}

std::size_t select(const std::vector<PathCandidate>& cands, double bias_per_hop) {
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double s = score(cands[i], bias_per_hop * std::max<std::uint32_t>(cands[i].extra_hops, 1));
    if (s < best_score) {
      best = i;
      best_score = s;
      continue;
    }
    if (s > best_score) continue;
    const auto& a = cands[i];
    const auto& b = cands[best];
    if (a.length_class != b.length_class) {
      if (a.length_class == PathClass::Minimal) best = i;
      continue;
    }
    if (a.path.switches < b.path.switches) best = i;
  }
  return best;
}

Router::Router(const Topology& topo, RoutingConfig cfg, std::uint32_t max_frame_bytes)
    : topo_(&topo),
      cfg_(cfg),
      bias_(cfg.bias.value_or(static_cast<double>(max_frame_bytes))),
      groups_(topo.num_groups()) {
  const std::uint32_t S = topo.params().switches_per_group;
  global_.resize(static_cast<std::size_t>(groups_) * groups_);
  local_.resize(static_cast<std::size_t>(topo.num_switches()) * S);
  for (SwitchId s = 0; s < topo.num_switches(); ++s) {
    const auto& ports = topo.switch_info(s).ports;
    for (PortId p = 0; p < ports.size(); ++p) {
      if (ports[p].peer != PeerKind::Switch) continue;
      const SwitchId t = ports[p].peer_id;
      if (topo.group_of(t) == topo.group_of(s)) {
        local_[static_cast<std::size_t>(s) * S + topo.switch_info(t).index_in_group].push_back(p);
      } else {
        global_[static_cast<std::size_t>(topo.group_of(s)) * groups_ + topo.group_of(t)].push_back({s, p});
      }
    }
  }
}

const std::vector<Path>& Router::minimal(SwitchId src, SwitchId dst) {
  const std::uint64_t key = (static_cast<std::uint64_t>(src) << 32) | dst;
  auto it = minimal_cache_.find(key);
  if (it == minimal_cache_.end()) it = minimal_cache_.emplace(key, minimal_switch_paths(*topo_, src, dst)).first;
  return it->second;
}

void Router::hop(Path& path, SwitchId next, Rng& rng) const {
  const SwitchId from = path.switches.back();
  if (from == next) return;
  const auto& ports = local_[static_cast<std::size_t>(from) * topo_->params().switches_per_group +
                             topo_->switch_info(next).index_in_group];
  path.out_ports.push_back(ports[uniform_below(rng, ports.size())]);
  path.switches.push_back(next);
}

std::optional<Path> Router::sample_nonminimal(SwitchId src, SwitchId dst, Rng& rng) {
  if (src == dst) return std::nullopt;
  const std::uint32_t gs = topo_->group_of(src);
  const std::uint32_t gd = topo_->group_of(dst);
  const std::uint32_t S = topo_->params().switches_per_group;
  Path path{{src}, {}, PathClass::Nonminimal};
  if (gs == gd) {
    if (S < 3) return std::nullopt;
    // Uniform over the S - 2 switches that are neither end.
    std::uint32_t k = static_cast<std::uint32_t>(uniform_below(rng, S - 2));
    const std::uint32_t a = std::min(topo_->switch_info(src).index_in_group, topo_->switch_info(dst).index_in_group);
    const std::uint32_t b = std::max(topo_->switch_info(src).index_in_group, topo_->switch_info(dst).index_in_group);
    if (k >= a) ++k;
    if (k >= b) ++k;
    hop(path, topo_->switch_at(gs, k), rng);
    hop(path, dst, rng);
    return path;
  }
  if (groups_ < 3) return std::nullopt;
  std::uint32_t mid = static_cast<std::uint32_t>(uniform_below(rng, groups_ - 2));
  if (mid >= std::min(gs, gd)) ++mid;
  if (mid >= std::max(gs, gd)) ++mid;
  const auto& out_links = global_[static_cast<std::size_t>(gs) * groups_ + mid];
  const auto& in_links = global_[static_cast<std::size_t>(mid) * groups_ + gd];
  const GlobalPort first = out_links[uniform_below(rng, out_links.size())];
  const GlobalPort second = in_links[uniform_below(rng, in_links.size())];
  hop(path, first.sw, rng);
  path.out_ports.push_back(first.port);
  path.switches.push_back(topo_->switch_info(first.sw).ports[first.port].peer_id);
  hop(path, second.sw, rng);
  path.out_ports.push_back(second.port);
  path.switches.push_back(topo_->switch_info(second.sw).ports[second.port].peer_id);
  hop(path, dst, rng);
  return path;
}

double Router::congestion_of(const std::vector<CongestionTable>& tables, const Path& p) const {
  if (p.hops() == 0) return 0.0;
  const auto& t = tables[p.switches[0]];
  double c = static_cast<double>(t.local(p.out_ports[0]));
  if (p.hops() >= 2) c += static_cast<double>(t.remote(p.out_ports[0], p.out_ports[1]));
  return c;
}

std::vector<PathCandidate> Router::candidates(const std::vector<CongestionTable>& tables, SwitchId src_switch,
                                              SwitchId dst_switch, Rng& rng) {
  std::vector<PathCandidate> out;
  const auto& mins = minimal(src_switch, dst_switch);
  if (mins.empty()) return out;
  const std::size_t shortest = mins.front().hops();
  const std::size_t n_min = std::min<std::size_t>(cfg_.minimal_candidates == 0 ? 1 : cfg_.minimal_candidates, mins.size());
  if (n_min == mins.size()) {
    for (const auto& p : mins) out.push_back(PathCandidate{p, PathClass::Minimal, 0, 0.0});
  } else {
    // Partial Fisher-Yates over indices so the draw stays deterministic for a given rng state.
    std::vector<std::size_t> idx(mins.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < n_min; ++i) {
      const std::size_t j = i + uniform_below(rng, idx.size() - i);
      std::swap(idx[i], idx[j]);
      out.push_back(PathCandidate{mins[idx[i]], PathClass::Minimal, 0, 0.0});
    }
  }
  if (shortest > 0) {
    for (std::uint32_t i = 0; i < cfg_.nonminimal_candidates; ++i) {
      auto p = sample_nonminimal(src_switch, dst_switch, rng);
      if (!p) break;
      const bool dup = std::any_of(out.begin(), out.end(), [&](const PathCandidate& c) { return c.path == *p; });
      if (dup) continue;
      const auto extra = static_cast<std::uint32_t>(p->hops() > shortest ? p->hops() - shortest : 0);
      out.push_back(PathCandidate{std::move(*p), PathClass::Nonminimal, extra, 0.0});
    }
  }
  for (auto& c : out) c.congestion = congestion_of(tables, c.path);
  return out;
}

Path Router::route(const std::vector<CongestionTable>& tables, SwitchId src_switch, SwitchId dst_switch,
                   std::uint64_t flow_hash, bool ordered, std::optional<double> bias_override, Rng& rng) {
  ++decisions_;
  if (ordered || !cfg_.adaptive) {
    const auto& mins = minimal(src_switch, dst_switch);
    return mins[mix_seed(flow_hash) % mins.size()];
  }
  auto cands = candidates(tables, src_switch, dst_switch, rng);
  const std::size_t best = select(cands, bias_override.value_or(bias_));
  if (cands[best].length_class == PathClass::Nonminimal) ++nonminimal_chosen_;
  return std::move(cands[best].path);
}

}  // namespace dflysim
