#include <doctest.h>

#include <algorithm>

#include "dflysim/routing.hpp"

using namespace dflysim;

namespace {

DragonflyParams params(std::uint32_t g, std::uint32_t s, std::uint32_t e) {
  DragonflyParams p;
  p.num_groups = g;
  p.switches_per_group = s;
  p.endpoints_per_switch = e;
  return p;
}

std::vector<CongestionTable> quiet(const Topology& t) {
  std::vector<CongestionTable> tables;
  for (SwitchId s = 0; s < t.num_switches(); ++s) tables.emplace_back(t.ports_used(s));
  return tables;
}

PathCandidate cand(std::vector<SwitchId> sw, PathClass c, std::uint32_t extra, double cong) {
  PathCandidate p;
  p.path.switches = std::move(sw);
  p.path.out_ports.resize(p.path.switches.size() - 1);
  p.path.cls = c;
  p.length_class = c;
  p.extra_hops = extra;
  p.congestion = cong;
  return p;
}

}  // namespace

TEST_CASE("score adds the bias to detours only") {
  CHECK(score(cand({0, 1}, PathClass::Minimal, 0, 0), 4158) == 0.0);
  CHECK(score(cand({0, 2, 1}, PathClass::Nonminimal, 1, 0), 4158) == 4158.0);
}

TEST_CASE("select") {
  std::vector<PathCandidate> c{cand({0, 1}, PathClass::Minimal, 0, 0)};
  CHECK(select(c, 100) == 0);
  // Equal congestion: the minimal path wins.
  c = {cand({0, 2, 1}, PathClass::Nonminimal, 1, 50), cand({0, 1}, PathClass::Minimal, 0, 50)};
  CHECK(select(c, 100) == 1);
  // Zero bias still prefers minimal on a tie.
  CHECK(select(c, 0) == 1);
  // First hop loaded beyond the bias, idle detour: by hand 20000 > 0 + 4158.
  c = {cand({0, 1}, PathClass::Minimal, 0, 20000), cand({0, 2, 1}, PathClass::Nonminimal, 1, 0)};
  CHECK(select(c, 4158) == 1);
  // Below the bias the minimal path is kept: 3000 < 4158.
  c[0].congestion = 3000;
  CHECK(select(c, 4158) == 0);
  // Among equal minimal paths the smaller switch sequence wins.
  c = {cand({0, 3, 1}, PathClass::Minimal, 0, 0), cand({0, 2, 1}, PathClass::Minimal, 0, 0)};
  CHECK(select(c, 4158) == 1);
}

TEST_CASE("congestion table snapshots") {
  CongestionTable t(4);
  t.add_local(2, 5000);
  t.add_local(2, -1000);
  CHECK(t.local(2) == 4000);
  CHECK(t.remote(1, 3) == 0);
  CHECK(!t.remote_stamp(1));
  CHECK(t.on_ack_info(1, {0, 0, 0, 1000}, SimTime{10}));
  CHECK(t.remote(1, 3) == 1000);
  CHECK(t.on_ack_info(1, {0, 0, 0, 0}, SimTime{20}));
  CHECK(t.remote(1, 3) == 0);
  CHECK(!t.on_ack_info(1, {0, 0, 0, 777}, SimTime{15}));
  CHECK(t.remote(1, 3) == 0);
  CHECK(t.remote_stamp(1) == SimTime{20});
  CHECK(t.reverse_overhead_bytes() == 3 * CongestionTable::kAdvertBytes);
}

TEST_CASE("candidates") {
  const auto topo = build_dragonfly(params(3, 2, 1));
  Router r(topo, RoutingConfig{}, 4158);
  auto tables = quiet(topo);
  Rng rng(3);
  auto same = r.candidates(tables, 1, 1, rng);
  REQUIRE(same.size() == 1);
  CHECK(same[0].path.hops() == 0);

  // Group 0 to group 1: detours must pass through group 2.
  for (int i = 0; i < 50; ++i) {
    const auto c = r.candidates(tables, 0, 3, rng);
    CHECK(c.size() <= 4);
    CHECK(std::count_if(c.begin(), c.end(), [](auto& x) { return x.length_class == PathClass::Minimal; }) >= 1);
    for (const auto& x : c) {
      CHECK(x.congestion == 0.0);
      if (x.length_class == PathClass::Nonminimal) {
        bool via2 = false;
        for (auto s : x.path.switches) via2 = via2 || topo.group_of(s) == 2;
        CHECK(via2);
      }
    }
  }
}

TEST_CASE("quiet network always routes minimally") {
  const auto topo = build_dragonfly(params(8, 4, 2));
  Router r(topo, RoutingConfig{}, 4158);
  auto tables = quiet(topo);
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const SwitchId s = rng() % topo.num_switches(), d = rng() % topo.num_switches();
    const auto p = r.route(tables, s, d, rng(), false, std::nullopt, rng);
    const auto& mins = minimal_switch_paths(topo, s, d);
    CHECK(std::find(mins.begin(), mins.end(), p) != mins.end());
  }
  CHECK(r.nonminimal_chosen() == 0);
}

TEST_CASE("loaded first hop diverts to a detour") {
  // Four switches per group so an intra-group detour exists.
  const auto topo = build_dragonfly(params(3, 4, 1));
  Router r(topo, RoutingConfig{}, 4158);
  auto tables = quiet(topo);
  const auto& mins = r.minimal(0, 1);
  REQUIRE(mins.size() == 1);
  tables[0].add_local(mins[0].out_ports[0], 100000);
  Rng rng(2);
  const auto p = r.route(tables, 0, 1, 7, false, std::nullopt, rng);
  CHECK(p.cls == PathClass::Nonminimal);
  // Ordered traffic stays on its hashed minimal path.
  const auto q = r.route(tables, 0, 1, 7, true, std::nullopt, rng);
  CHECK(q == mins[0]);
  // A huge per-class bias keeps even unordered traffic minimal.
  const auto b = r.route(tables, 0, 1, 7, false, 1e9, rng);
  CHECK(b == mins[0]);
}

TEST_CASE("non-adaptive routing hashes flows onto minimal paths") {
  const auto topo = build_dragonfly(params(4, 2, 1));
  RoutingConfig cfg;
  cfg.adaptive = false;
  Router r(topo, cfg, 4158);
  auto tables = quiet(topo);
  Rng rng(1);
  const auto a = r.route(tables, 0, 7, 99, false, std::nullopt, rng);
  for (int i = 0; i < 20; ++i) CHECK(r.route(tables, 0, 7, 99, false, std::nullopt, rng) == a);
}
