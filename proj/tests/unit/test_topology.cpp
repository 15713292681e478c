#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "dflysim/topology.hpp"
#include "oracles.hpp"

using namespace dflysim;
using namespace dflysim::testing;

namespace {

DragonflyParams params(std::uint32_t g, std::uint32_t s, std::uint32_t e, std::uint32_t intra = 1, std::uint32_t glob = 1) {
  DragonflyParams p;
  p.num_groups = g;
  p.switches_per_group = s;
  p.endpoints_per_switch = e;
  p.intra_links_per_pair = intra;
  p.global_links_per_group_pair = glob;
  return p;
}

}  // namespace

TEST_CASE("max_system") {
  CHECK(max_system(64, 16) == SystemSize{32, 17, 545, 279040});
  const auto limited = max_system(64, 16, 511);
  CHECK(limited.groups == 511);
  CHECK(limited.endpoints == 261632);
  const auto p = max_system_params(64, 16);
  CHECK(p.num_groups == 545);
  CHECK(p.switches_per_group == 32);
  CHECK_THROWS_AS(max_system(4, 4), TopologyError);
}

TEST_CASE("max_system agrees with building every candidate group size") {
  // Oracle: build each fully connected candidate with the topology builder, audit the ports and
  // count the endpoints it really has.
  for (std::uint32_t radix : {6U, 8U, 12U}) {
    for (std::uint32_t ep = 1; ep < radix - 1; ++ep) {
      std::uint64_t best = 0;
      for (std::uint32_t a = 1; a <= 2 * ep && a + ep <= radix; ++a) {
        const std::uint32_t h = radix - ep - (a - 1);
        auto p = params(a * h + 1, a, ep);
        p.radix = radix;
        const auto t = build_dragonfly(p);
        for (SwitchId s = 0; s < t.num_switches(); ++s) REQUIRE(t.ports_used(s) <= radix);
        best = std::max<std::uint64_t>(best, t.num_endpoints());
      }
      CHECK(max_system(radix, ep).endpoints == best);
    }
  }
}

TEST_CASE("the full-scale topology uses every port") {
  const auto t = build_dragonfly(max_system_params(64, 16));
  CHECK(t.num_endpoints() == 279040);
  for (SwitchId s = 0; s < t.num_switches(); s += 97) CHECK(t.ports_used(s) == 64);
}

TEST_CASE("smallest two-group instance") {
  const auto t = build_dragonfly(params(2, 2, 1));
  CHECK(t.num_switches() == 4);
  CHECK(t.num_endpoints() == 4);
  CHECK(t.count_links(Medium::Copper, false) == 2);
  CHECK(t.count_links(Medium::Optical, false) == 1);
}

TEST_CASE("eight groups with eight links per pair") {
  const auto t = build_dragonfly(params(8, 8, 16, 1, 8));
  std::vector<std::uint32_t> per_group(8);
  for (const auto& l : t.links()) {
    if (l.medium != Medium::Optical) continue;
    ++per_group[t.group_of(l.a.id)];
    ++per_group[t.group_of(l.b.id)];
  }
  for (auto c : per_group) CHECK(c == 56);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS(validate(params(0, 2, 1)), TopologyError);
  auto p = params(4, 2, 1, 1, 0);
  try {
    validate(p);
    FAIL("expected an error");
  } catch (const TopologyError& e) {
    CHECK(e.kind() == TopologyError::Kind::AsymmetricGlobal);
  }
  p = params(2, 2, 63);
  try {
    validate(p);
    FAIL("expected an error");
  } catch (const TopologyError& e) {
    CHECK(e.kind() == TopologyError::Kind::PortBudgetExceeded);
  }
  p = params(2, 2, 1);
  p.global_bandwidth_taper = 0;
  CHECK_THROWS_AS(validate(p), TopologyError);
}

TEST_CASE("port audit and group symmetry on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = params(2 + rng() % 6, 1 + rng() % 5, 1 + rng() % 4, 1 + rng() % 2, 1 + rng() % 3);
    try {
      validate(p);
    } catch (const TopologyError&) {
      continue;
    }
    const auto t = build_dragonfly(p);
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> pair_links;
    std::set<std::pair<SwitchId, PortId>> used;
    for (const auto& l : t.links()) {
      for (const auto* e : {&l.a, &l.b}) {
        if (e->kind == LinkEndKind::SwitchPort) {
          CHECK(e->port < 64);
          CHECK(used.insert({e->id, e->port}).second);
        }
      }
      if (l.medium == Medium::Optical) {
        const auto ga = t.group_of(l.a.id), gb = t.group_of(l.b.id);
        CHECK(ga != gb);
        ++pair_links[{std::min(ga, gb), std::max(ga, gb)}];
      }
    }
    CHECK(pair_links.size() == p.num_groups * (p.num_groups - 1) / 2);
    for (const auto& [k, c] : pair_links) CHECK(c == p.global_links_per_group_pair);
    CHECK(switch_diameter(t) <= 3);
  }
}

TEST_CASE("endpoints attach contiguously") {
  const auto t = build_dragonfly(params(3, 2, 4));
  for (EndpointId e = 0; e < t.num_endpoints(); ++e) CHECK(t.switch_of(e) == e / 4);
}

TEST_CASE("minimal paths match the BFS oracle") {
  for (auto p : {params(3, 3, 1), params(4, 2, 1, 2, 2), params(5, 4, 1, 1, 1), params(2, 4, 1, 1, 3)}) {
    const auto t = build_dragonfly(p);
    for (SwitchId s = 0; s < t.num_switches(); ++s) {
      for (SwitchId d = 0; d < t.num_switches(); ++d) {
        std::set<std::vector<std::uint32_t>> got;
        for (const auto& path : minimal_switch_paths(t, s, d)) {
          CHECK(path.cls == PathClass::Minimal);
          CHECK(path.switches.size() <= 4);
          got.insert(flatten(path));
        }
        CHECK(got == oracle_shortest(t, s, d));
      }
    }
  }
}

TEST_CASE("minimal path examples") {
  const auto t = build_dragonfly(params(3, 2, 2));
  auto same = minimal_paths(t, 0, 1);
  REQUIRE(same.size() == 1);
  CHECK(same[0].hops() == 0);

  // The largest system: N0 to N496 is S0 to S31, one direct intra-group link.
  const auto big = build_dragonfly(params(2, 32, 16));
  const auto paths = minimal_paths(big, 0, 496);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].switches == std::vector<SwitchId>{0, 31});
}

TEST_CASE("nonminimal paths") {
  const auto t = build_dragonfly(params(3, 2, 1));
  Rng rng(5);
  CHECK(nonminimal_switch_paths(t, 0, 2, 0, rng).empty());
  // Only group 2 can serve as the intermediate of a group 0 to group 1 pair.
  const auto paths = nonminimal_switch_paths(t, 0, 2, 16, rng);
  CHECK(!paths.empty());
  for (const auto& p : paths) {
    CHECK(p.cls == PathClass::Nonminimal);
    bool via2 = false;
    for (auto s : p.switches) via2 = via2 || t.group_of(s) == 2;
    CHECK(via2);
  }
}

TEST_CASE("every nonminimal path is a valid walk through one intermediate") {
  std::mt19937_64 pick(9);
  for (auto p : {params(4, 3, 1), params(3, 4, 1, 1, 2)}) {
    const auto t = build_dragonfly(p);
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
      const SwitchId s = pick() % t.num_switches(), d = pick() % t.num_switches();
      if (s == d) continue;
      const auto min_hops = minimal_switch_paths(t, s, d).front().hops();
      for (const auto& path : nonminimal_switch_paths(t, s, d, 4, rng)) {
        REQUIRE(path.switches.front() == s);
        REQUIRE(path.switches.back() == d);
        for (std::size_t k = 0; k < path.hops(); ++k) {
          const auto& port = t.switch_info(path.switches[k]).ports.at(path.out_ports[k]);
          CHECK(port.peer == PeerKind::Switch);
          CHECK(port.peer_id == path.switches[k + 1]);
        }
        // local, global, local, global, local at most; a detour of a one-hop route can add four.
        CHECK(path.hops() <= 5);
        CHECK(path.hops() >= min_hops);
        if (t.group_of(s) == t.group_of(d)) {
          CHECK(path.switches.size() == 3);
        } else {
          std::set<std::uint32_t> groups;
          for (auto x : path.switches) groups.insert(t.group_of(x));
          CHECK(groups.size() == 3);
        }
      }
    }
  }
}

TEST_CASE("bandwidth bounds") {
  const auto t = build_dragonfly(params(8, 8, 16, 1, 8));
  // 128 links cut, both directions: 51 200 Gb/s, which is 6.4 TB/s.
  CHECK(bisection_bound(t) == 51200.0);
  CHECK(all_to_all_bound(t) == doctest::Approx(8.0 / 7.0 * 448 * 200));
  CHECK(all_to_all_bound(t) / 8000.0 == doctest::Approx(12.8));
  auto p = params(2, 1, 1);
  p.link_bandwidth_gbps = 100;
  CHECK(bisection_bound(build_dragonfly(p)) == 200.0);
  CHECK_THROWS_AS(bisection_bound(t, {0, 1, 2}), TopologyError);
}

TEST_CASE("bisection bound equals the exhaustive min cut") {
  for (std::uint32_t g = 2; g <= 6; g += 2) {
    for (std::uint32_t s = 1; s <= 4; ++s) {
      for (std::uint32_t gl = 1; gl <= 2; ++gl) {
        auto p = params(g, s, 1, 1, gl);
        p.global_bandwidth_taper = 0.5;
        const auto t = build_dragonfly(p);
        CHECK(bisection_bound(t) == doctest::Approx(oracle_min_cut(t)));
      }
    }
  }
}

TEST_CASE("adjacency export round trip and golden file") {
  const auto t = build_dragonfly(params(2, 2, 1));
  std::ostringstream out;
  export_adjacency(t, out);
  std::ifstream golden(DFLYSIM_TEST_DATA "/adjacency_2x2x1.txt");
  REQUIRE(golden);
  std::stringstream g;
  g << golden.rdbuf();
  CHECK(out.str() == g.str());

  const auto big = build_dragonfly(params(4, 3, 2, 2, 2));
  std::stringstream a;
  export_adjacency(big, a);
  const auto back = import_adjacency(a);
  std::ostringstream again;
  export_adjacency(back, again);
  CHECK(a.str() == again.str());
  std::istringstream bad("# nothing\ncopper S0:0 X1\n");
  CHECK_THROWS_AS(import_adjacency(bad), TopologyError);
}
