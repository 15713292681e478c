#include "dflysim/topology.hpp"

#include <algorithm>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace dflysim {

namespace {

using Kind = TopologyError::Kind;

std::uint32_t global_ports_needed(const DragonflyParams& p) {
  const std::uint64_t per_group = static_cast<std::uint64_t>(p.num_groups - 1) * p.global_links_per_group_pair;
  return static_cast<std::uint32_t>((per_group + p.switches_per_group - 1) / p.switches_per_group);
}

PortId claim_port(SwitchInfo& sw, std::uint32_t radix, SwitchId id) {
  if (sw.ports.size() >= radix) {
    throw TopologyError(Kind::PortBudgetExceeded, "switch " + std::to_string(id) + " ran out of ports");
  }
  sw.ports.emplace_back();
  return static_cast<PortId>(sw.ports.size() - 1);
}

}  // namespace

void validate(const DragonflyParams& p) {
  if (p.num_groups == 0 || p.switches_per_group == 0) {
    throw TopologyError(Kind::InvalidParams, "a dragonfly needs at least one group and one switch per group");
  }
  if (p.endpoints_per_switch == 0) throw TopologyError(Kind::InvalidParams, "endpoints_per_switch must be >= 1");
  if (!(p.link_bandwidth_gbps > 0.0)) throw TopologyError(Kind::InvalidParams, "link bandwidth must be > 0");
  if (!(p.global_bandwidth_taper > 0.0 && p.global_bandwidth_taper <= 1.0)) {
    throw TopologyError(Kind::InvalidParams, "global_bandwidth_taper must be in (0, 1]");
  }
  if (p.copper_propagation_ns < 0.0 || p.optical_propagation_ns < 0.0) {
    throw TopologyError(Kind::InvalidParams, "propagation delays must be non-negative");
  }
  if (p.switches_per_group > 1 && p.intra_links_per_pair == 0) {
    throw TopologyError(Kind::InvalidParams, "switches inside a group must be fully connected (intra_links_per_pair >= 1)");
  }
  if (p.num_groups > 1 && p.global_links_per_group_pair == 0) {
    throw TopologyError(Kind::AsymmetricGlobal, "every group pair needs at least one global link");
  }
  const std::uint64_t used = static_cast<std::uint64_t>(p.endpoints_per_switch) +
                             static_cast<std::uint64_t>(p.switches_per_group - 1) * p.intra_links_per_pair +
                             global_ports_needed(p);
  if (used > p.radix) {
    throw TopologyError(Kind::PortBudgetExceeded, "each switch needs " + std::to_string(used) +
                                                      " ports but the radix is " + std::to_string(p.radix));
  }
}

LinkId Topology::add_link(Medium m, double gbps, double prop_ns, LinkEnd a, LinkEnd b) {
  const auto id = static_cast<LinkId>(links_.size());
  links_.push_back(Link{id, gbps, prop_ns, m, a, b});
  return id;
}

Topology build_dragonfly(const DragonflyParams& p) {
  validate(p);
  Topology t;
  t.params_ = p;
  const std::uint32_t G = p.num_groups;
  const std::uint32_t S = p.switches_per_group;
  t.switches_.resize(static_cast<std::size_t>(G) * S);
  for (std::uint32_t g = 0; g < G; ++g) {
    for (std::uint32_t i = 0; i < S; ++i) {
      auto& sw = t.switches_[t.switch_at(g, i)];
      sw.group = g;
      sw.index_in_group = i;
      sw.ports.reserve(p.endpoints_per_switch + (S - 1) * p.intra_links_per_pair + global_ports_needed(p));
    }
  }

  // Endpoints are numbered contiguously per switch and take the lowest ports.
  t.endpoints_.resize(static_cast<std::size_t>(G) * S * p.endpoints_per_switch);
  for (SwitchId s = 0; s < t.switches_.size(); ++s) {
    for (std::uint32_t k = 0; k < p.endpoints_per_switch; ++k) {
      const EndpointId e = s * p.endpoints_per_switch + k;
      const PortId port = claim_port(t.switches_[s], p.radix, s);
      const LinkId l = t.add_link(Medium::Copper, p.link_bandwidth_gbps, p.copper_propagation_ns,
                                  LinkEnd{LinkEndKind::Nic, e, 0}, LinkEnd{LinkEndKind::SwitchPort, s, port});
      t.switches_[s].ports[port] = PortInfo{PeerKind::Nic, e, 0, l};
      t.endpoints_[e] = EndpointInfo{s, port, l};
    }
  }

  auto connect = [&](SwitchId a, SwitchId b, Medium m, double gbps, double prop) {
    const PortId pa = claim_port(t.switches_[a], p.radix, a);
    const PortId pb = claim_port(t.switches_[b], p.radix, b);
    const LinkId l = t.add_link(m, gbps, prop, LinkEnd{LinkEndKind::SwitchPort, a, pa},
                                LinkEnd{LinkEndKind::SwitchPort, b, pb});
    t.switches_[a].ports[pa] = PortInfo{PeerKind::Switch, b, pb, l};
    t.switches_[b].ports[pb] = PortInfo{PeerKind::Switch, a, pa, l};
  };

  for (std::uint32_t g = 0; g < G; ++g) {
    for (std::uint32_t i = 0; i < S; ++i) {
      for (std::uint32_t j = i + 1; j < S; ++j) {
        for (std::uint32_t k = 0; k < p.intra_links_per_pair; ++k) {
          connect(t.switch_at(g, i), t.switch_at(g, j), Medium::Copper, p.link_bandwidth_gbps,
                  p.copper_propagation_ns);
        }
      }
    }
  }

  // Global slots of group g are ordered by (peer group, parallel index) and dealt round-robin
  // across the switches of the group.
  const double global_gbps = p.link_bandwidth_gbps * p.global_bandwidth_taper;
  const std::uint32_t L = p.global_links_per_group_pair;
  auto slot_switch = [&](std::uint32_t g, std::uint32_t peer, std::uint32_t k) {
    const std::uint32_t rank = peer < g ? peer : peer - 1;
    return t.switch_at(g, (rank * L + k) % S);
  };
  for (std::uint32_t g = 0; g < G; ++g) {
    for (std::uint32_t h = g + 1; h < G; ++h) {
      for (std::uint32_t k = 0; k < L; ++k) {
        connect(slot_switch(g, h, k), slot_switch(h, g, k), Medium::Optical, global_gbps, p.optical_propagation_ns);
      }
    }
  }
  return t;
}

std::size_t Topology::count_links(Medium m, bool host_links) const {
  return static_cast<std::size_t>(std::count_if(links_.begin(), links_.end(), [&](const Link& l) {
    const bool host = l.a.kind == LinkEndKind::Nic || l.b.kind == LinkEndKind::Nic;
    return l.medium == m && host == host_links;
  }));
}

std::vector<PortId> Topology::ports_toward(SwitchId s, SwitchId t) const {
  std::vector<PortId> out;
  const auto& ports = switches_[s].ports;
  for (PortId p = 0; p < ports.size(); ++p) {
    if (ports[p].peer == PeerKind::Switch && ports[p].peer_id == t) out.push_back(p);
  }
  return out;
}

std::vector<std::uint32_t> Topology::distances_to(SwitchId target) const {
  std::vector<std::uint32_t> dist(switches_.size(), kInvalidId);
  std::deque<SwitchId> frontier{target};
  dist[target] = 0;
  while (!frontier.empty()) {
    const SwitchId u = frontier.front();
    frontier.pop_front();
    for (const auto& port : switches_[u].ports) {
      if (port.peer != PeerKind::Switch || dist[port.peer_id] != kInvalidId) continue;
      dist[port.peer_id] = dist[u] + 1;
      frontier.push_back(port.peer_id);
    }
  }
  return dist;
}

SystemSize max_system(std::uint32_t radix, std::uint32_t endpoints_per_switch,
                      std::optional<std::uint64_t> addressing_limit) {
  if (radix <= endpoints_per_switch) {
    throw TopologyError(Kind::InvalidParams, "radix must exceed endpoints_per_switch");
  }
  const std::uint32_t network_ports = radix - endpoints_per_switch;
  // A group holds at most twice as many switches as endpoints per switch; every port left over
  // after the full intra-group mesh goes to global links. Pick the group size with most endpoints.
  std::uint32_t a = 1;
  std::uint64_t best = 0;
  for (std::uint32_t cand = 1; cand <= std::min(2 * endpoints_per_switch, network_ports); ++cand) {
    const std::uint64_t groups = static_cast<std::uint64_t>(cand) * (network_ports - (cand - 1)) + 1;
    const std::uint64_t eps = groups * cand * endpoints_per_switch;
    if (eps > best) {
      best = eps;
      a = cand;
    }
  }
  const std::uint32_t h = network_ports - (a - 1);
  SystemSize out;
  out.switches_per_group = a;
  out.global_ports_per_switch = h;
  out.groups = static_cast<std::uint64_t>(a) * h + 1;
  if (addressing_limit) out.groups = std::min(out.groups, *addressing_limit);
  out.endpoints = out.groups * a * endpoints_per_switch;
  return out;
}

DragonflyParams max_system_params(std::uint32_t radix, std::uint32_t endpoints_per_switch,
                                  std::optional<std::uint64_t> addressing_limit) {
  const SystemSize size = max_system(radix, endpoints_per_switch, addressing_limit);
  DragonflyParams p;
  p.radix = radix;
  p.num_groups = static_cast<std::uint32_t>(size.groups);
  p.switches_per_group = size.switches_per_group;
  p.endpoints_per_switch = endpoints_per_switch;
  p.intra_links_per_pair = 1;
  p.global_links_per_group_pair = 1;
  return p;
}

std::vector<Path> minimal_switch_paths(const Topology& topo, SwitchId src, SwitchId dst) {
  std::vector<Path> out;
  if (src == dst) {
    out.push_back(Path{{src}, {}, PathClass::Minimal});
    return out;
  }
  const auto dist = topo.distances_to(dst);
  if (dist[src] == kInvalidId) return out;
  Path cur{{src}, {}, PathClass::Minimal};
  auto walk = [&](auto&& self, SwitchId u) -> void {
    if (u == dst) {
      out.push_back(cur);
      return;
    }
    const auto& ports = topo.switch_info(u).ports;
    for (PortId p = 0; p < ports.size(); ++p) {
      const auto& port = ports[p];
      if (port.peer != PeerKind::Switch || dist[port.peer_id] + 1 != dist[u]) continue;
      cur.switches.push_back(port.peer_id);
      cur.out_ports.push_back(p);
      self(self, port.peer_id);
      cur.switches.pop_back();
      cur.out_ports.pop_back();
    }
  };
  walk(walk, src);
  return out;
}

std::vector<Path> minimal_paths(const Topology& topo, EndpointId src, EndpointId dst) {
  return minimal_switch_paths(topo, topo.switch_of(src), topo.switch_of(dst));
}

namespace {

struct GlobalPort {
  SwitchId sw;
  PortId port;
};

std::vector<GlobalPort> global_ports_between(const Topology& topo, std::uint32_t g, std::uint32_t h) {
  std::vector<GlobalPort> out;
  const std::uint32_t S = topo.params().switches_per_group;
  for (std::uint32_t i = 0; i < S; ++i) {
    const SwitchId s = topo.switch_at(g, i);
    const auto& ports = topo.switch_info(s).ports;
    for (PortId p = 0; p < ports.size(); ++p) {
      if (ports[p].peer == PeerKind::Switch && topo.group_of(ports[p].peer_id) == h) out.push_back({s, p});
    }
  }
  return out;
}

// Appends a hop from the path's tail switch to `next`, picking one of the parallel links.
void append_hop(const Topology& topo, Path& path, SwitchId next, Rng& rng) {
  const SwitchId from = path.switches.back();
  if (from == next) return;
  const auto ports = topo.ports_toward(from, next);
  path.out_ports.push_back(ports[uniform_below(rng, ports.size())]);
  path.switches.push_back(next);
}

}  // namespace

std::vector<Path> nonminimal_switch_paths(const Topology& topo, SwitchId src, SwitchId dst, std::size_t k,
                                          Rng& rng) {
  std::vector<Path> out;
  if (k == 0 || src == dst) return out;
  const std::uint32_t gs = topo.group_of(src);
  const std::uint32_t gd = topo.group_of(dst);
  const std::uint32_t S = topo.params().switches_per_group;
  const std::uint32_t G = topo.num_groups();

  std::vector<std::uint32_t> pool;
  if (gs == gd) {
    for (std::uint32_t i = 0; i < S; ++i) {
      const SwitchId m = topo.switch_at(gs, i);
      if (m != src && m != dst) pool.push_back(m);
    }
  } else {
    for (std::uint32_t g = 0; g < G; ++g) {
      if (g != gs && g != gd) pool.push_back(g);
    }
  }
  if (pool.empty()) return out;
  std::shuffle(pool.begin(), pool.end(), rng);

  // Distinct intermediates first; once exhausted, further draws reuse intermediates with other
  // link choices. Duplicates are dropped, so fewer than k paths may come back.
  const std::size_t attempts = std::max(k, pool.size()) * 2;
  for (std::size_t i = 0; i < attempts && out.size() < k; ++i) {
    const std::uint32_t mid = i < pool.size() ? pool[i] : pool[uniform_below(rng, pool.size())];
    Path path{{src}, {}, PathClass::Nonminimal};
    if (gs == gd) {
      append_hop(topo, path, mid, rng);
      append_hop(topo, path, dst, rng);
    } else {
      const auto out_links = global_ports_between(topo, gs, mid);
      const auto in_links = global_ports_between(topo, mid, gd);
      const GlobalPort first = out_links[uniform_below(rng, out_links.size())];
      const GlobalPort second = in_links[uniform_below(rng, in_links.size())];
      append_hop(topo, path, first.sw, rng);
      path.out_ports.push_back(first.port);
      path.switches.push_back(topo.switch_info(first.sw).ports[first.port].peer_id);
      append_hop(topo, path, second.sw, rng);
      path.out_ports.push_back(second.port);
      path.switches.push_back(topo.switch_info(second.sw).ports[second.port].peer_id);
      append_hop(topo, path, dst, rng);
    }
    if (i >= pool.size() && std::find(out.begin(), out.end(), path) != out.end()) continue;
    out.push_back(std::move(path));
  }
  return out;
}

std::vector<Path> nonminimal_paths(const Topology& topo, EndpointId src, EndpointId dst, std::size_t k, Rng& rng) {
  return nonminimal_switch_paths(topo, topo.switch_of(src), topo.switch_of(dst), k, rng);
}

namespace {
double global_link_gbps(const Topology& topo) {
  return topo.params().link_bandwidth_gbps * topo.params().global_bandwidth_taper;
}
}  // namespace

double bisection_bound(const Topology& topo, const std::vector<std::uint32_t>& half_a) {
  const std::uint32_t G = topo.num_groups();
  std::vector<bool> in_a(G, false);
  for (auto g : half_a) {
    if (g >= G || in_a[g]) throw TopologyError(Kind::OddPartition, "partition lists an invalid or repeated group");
    in_a[g] = true;
  }
  if (G % 2 != 0 || half_a.size() * 2 != G) {
    throw TopologyError(Kind::OddPartition, "bisection needs two equal halves of groups");
  }
  const std::uint64_t half = G / 2;
  const std::uint64_t cut = half * half * topo.params().global_links_per_group_pair;
  return static_cast<double>(cut) * global_link_gbps(topo) * 2.0;
}

double bisection_bound(const Topology& topo) {
  std::vector<std::uint32_t> half(topo.num_groups() / 2);
  for (std::uint32_t g = 0; g < half.size(); ++g) half[g] = g;
  return bisection_bound(topo, half);
}

double all_to_all_bound(const Topology& topo) {
  const std::uint32_t G = topo.num_groups();
  if (G < 2) throw TopologyError(Kind::InvalidParams, "all-to-all bound needs at least two groups");
  // Each physical global link is counted once per direction.
  const double directed_links = 2.0 * static_cast<double>(topo.count_links(Medium::Optical, false));
  return static_cast<double>(G) / (G - 1) * directed_links * global_link_gbps(topo);
}

std::uint32_t switch_diameter(const Topology& topo) {
  std::uint32_t diameter = 0;
  for (SwitchId s = 0; s < topo.num_switches(); ++s) {
    for (auto d : topo.distances_to(s)) diameter = std::max(diameter, d);
  }
  return diameter;
}

void export_adjacency(const Topology& topo, std::ostream& out) {
  const auto& p = topo.params();
  out << "# dflysim adjacency v1\n";
  out << "# params groups=" << p.num_groups << " switches_per_group=" << p.switches_per_group
      << " endpoints_per_switch=" << p.endpoints_per_switch << " intra_links_per_pair=" << p.intra_links_per_pair
      << " global_links_per_group_pair=" << p.global_links_per_group_pair
      << " link_bandwidth_gbps=" << p.link_bandwidth_gbps << " global_bandwidth_taper=" << p.global_bandwidth_taper
      << " copper_propagation_ns=" << p.copper_propagation_ns
      << " optical_propagation_ns=" << p.optical_propagation_ns << " radix=" << p.radix << "\n";
  auto end = [](const LinkEnd& e) {
    return e.kind == LinkEndKind::Nic ? "N" + std::to_string(e.id)
                                      : "S" + std::to_string(e.id) + ":" + std::to_string(e.port);
  };
  for (const auto& l : topo.links()) {
    const char* type = l.a.kind == LinkEndKind::Nic ? "host" : (l.medium == Medium::Optical ? "global" : "local");
    out << type << ' ' << end(l.a) << ' ' << end(l.b) << ' ' << l.bandwidth_gbps << '\n';
  }
}

namespace {
LinkEnd parse_end(const std::string& tok, std::size_t line_no) {
  auto fail = [&]() -> LinkEnd {
    throw TopologyError(Kind::ParseError, "line " + std::to_string(line_no) + ": bad link end '" + tok + "'");
  };
  try {
    if (tok.size() > 1 && tok[0] == 'N') return LinkEnd{LinkEndKind::Nic, static_cast<std::uint32_t>(std::stoul(tok.substr(1))), 0};
    const auto colon = tok.find(':');
    if (tok.size() > 1 && tok[0] == 'S' && colon != std::string::npos) {
      return LinkEnd{LinkEndKind::SwitchPort, static_cast<std::uint32_t>(std::stoul(tok.substr(1, colon - 1))),
                     static_cast<PortId>(std::stoul(tok.substr(colon + 1)))};
    }
  } catch (const std::logic_error&) {
  }
  return fail();
}
}  // namespace

Topology import_adjacency(std::istream& in) {
  Topology t;
  bool have_params = false;
  std::string line;
  std::size_t line_no = 0;
  struct Pending {
    std::string type;
    LinkEnd a, b;
    double gbps;
    std::size_t line_no;
  };
  std::vector<Pending> pending;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, tag;
      ls >> hash >> tag;
      if (tag != "params") continue;
      std::map<std::string, std::string> kv;
      std::string item;
      while (ls >> item) {
        const auto eq = item.find('=');
        if (eq != std::string::npos) kv[item.substr(0, eq)] = item.substr(eq + 1);
      }
      auto get = [&](const char* key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw TopologyError(Kind::ParseError, std::string("params header lacks ") + key);
        return it->second;
      };
      auto& p = t.params_;
      p.num_groups = static_cast<std::uint32_t>(std::stoul(get("groups")));
      p.switches_per_group = static_cast<std::uint32_t>(std::stoul(get("switches_per_group")));
      p.endpoints_per_switch = static_cast<std::uint32_t>(std::stoul(get("endpoints_per_switch")));
      p.intra_links_per_pair = static_cast<std::uint32_t>(std::stoul(get("intra_links_per_pair")));
      p.global_links_per_group_pair = static_cast<std::uint32_t>(std::stoul(get("global_links_per_group_pair")));
      p.link_bandwidth_gbps = std::stod(get("link_bandwidth_gbps"));
      p.global_bandwidth_taper = std::stod(get("global_bandwidth_taper"));
      p.copper_propagation_ns = std::stod(get("copper_propagation_ns"));
      p.optical_propagation_ns = std::stod(get("optical_propagation_ns"));
      p.radix = static_cast<std::uint32_t>(std::stoul(get("radix")));
      have_params = true;
      continue;
    }
    std::string type, a, b;
    double gbps = 0;
    if (!(ls >> type >> a >> b >> gbps)) {
      throw TopologyError(Kind::ParseError, "line " + std::to_string(line_no) + ": expected 'type a b bandwidth'");
    }
    pending.push_back(Pending{type, parse_end(a, line_no), parse_end(b, line_no), gbps, line_no});
  }
  if (!have_params) throw TopologyError(Kind::ParseError, "missing '# params' header line");
  validate(t.params_);

  const auto& p = t.params_;
  t.switches_.resize(static_cast<std::size_t>(p.num_groups) * p.switches_per_group);
  for (SwitchId s = 0; s < t.switches_.size(); ++s) {
    t.switches_[s].group = s / p.switches_per_group;
    t.switches_[s].index_in_group = s % p.switches_per_group;
  }
  t.endpoints_.resize(t.switches_.size() * p.endpoints_per_switch);
  auto port_slot = [&](SwitchId s, PortId port, std::size_t ln) -> PortInfo& {
    if (s >= t.switches_.size() || port >= p.radix) {
      throw TopologyError(Kind::ParseError, "line " + std::to_string(ln) + ": switch or port out of range");
    }
    auto& ports = t.switches_[s].ports;
    if (ports.size() <= port) ports.resize(port + 1);
    if (ports[port].peer != PeerKind::Unused) {
      throw TopologyError(Kind::ParseError, "line " + std::to_string(ln) + ": port assigned twice");
    }
    return ports[port];
  };
  for (const auto& pl : pending) {
    if (pl.type == "host") {
      if (pl.a.kind != LinkEndKind::Nic || pl.b.kind != LinkEndKind::SwitchPort || pl.a.id >= t.endpoints_.size()) {
        throw TopologyError(Kind::ParseError, "line " + std::to_string(pl.line_no) + ": malformed host link");
      }
      const LinkId l = t.add_link(Medium::Copper, pl.gbps, p.copper_propagation_ns, pl.a, pl.b);
      port_slot(pl.b.id, pl.b.port, pl.line_no) = PortInfo{PeerKind::Nic, pl.a.id, 0, l};
      t.endpoints_[pl.a.id] = EndpointInfo{pl.b.id, pl.b.port, l};
    } else if (pl.type == "local" || pl.type == "global") {
      if (pl.a.kind != LinkEndKind::SwitchPort || pl.b.kind != LinkEndKind::SwitchPort) {
        throw TopologyError(Kind::ParseError, "line " + std::to_string(pl.line_no) + ": switch link needs S ends");
      }
      const bool optical = pl.type == "global";
      const LinkId l = t.add_link(optical ? Medium::Optical : Medium::Copper, pl.gbps,
                                  optical ? p.optical_propagation_ns : p.copper_propagation_ns, pl.a, pl.b);
      port_slot(pl.a.id, pl.a.port, pl.line_no) = PortInfo{PeerKind::Switch, pl.b.id, pl.b.port, l};
      port_slot(pl.b.id, pl.b.port, pl.line_no) = PortInfo{PeerKind::Switch, pl.a.id, pl.a.port, l};
    } else {
      throw TopologyError(Kind::ParseError, "line " + std::to_string(pl.line_no) + ": unknown link type '" + pl.type + "'");
    }
  }
  for (EndpointId e = 0; e < t.endpoints_.size(); ++e) {
    if (t.endpoints_[e].link == kInvalidId) {
      throw TopologyError(Kind::ParseError, "endpoint " + std::to_string(e) + " has no host link");
    }
  }
  return t;
}

}  // namespace dflysim
