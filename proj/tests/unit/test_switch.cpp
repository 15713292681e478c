#include <doctest.h>

#include <numeric>

#include "dflysim/qos.hpp"
#include "dflysim/switch.hpp"

using namespace dflysim;

TEST_CASE("tile mapping") {
  CHECK(tile_of_port(0) == TileCoord{0, 0});
  CHECK(tile_of_port(19) == TileCoord{1, 1});
  CHECK(tile_of_port(56) == TileCoord{3, 4});
  CHECK(tile_of_port(63) == TileCoord{3, 7});
  CHECK_THROWS_AS(tile_of_port(64), std::out_of_range);
  CHECK(internal_hops(4, 5) == 1);
  CHECK(internal_hops(19, 56) == 2);
  for (PortId a = 0; a < 64; ++a) {
    for (PortId b = 0; b < 64; ++b) {
      const auto h = internal_hops(a, b);
      CHECK(h >= 1);
      CHECK(h <= 2);
      // Same row means the row bus alone reaches the output.
      CHECK((h == 1) == (a / 16 == b / 16));
    }
  }
}

TEST_CASE("traversal latency samples") {
  SwitchLatencyModel m;
  Rng rng(42);
  double sum = 0;
  std::int64_t lo = 1 << 30, hi = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto s = traversal_latency(m, rng).ns;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    sum += static_cast<double>(s);
  }
  CHECK(lo >= 300);
  CHECK(hi <= 400);
  CHECK(sum / n == doctest::Approx(350).epsilon(2.0 / 350));
  m.min_ns = m.max_ns = 350;
  for (int i = 0; i < 100; ++i) CHECK(traversal_latency(m, rng).ns == 350);
}

TEST_CASE("latency pieces add up to the sample") {
  SwitchLatencyModel m;
  for (std::int64_t s : {300, 333, 400}) {
    const auto x = m.crossbar(SimTime{s});
    CHECK(m.request().ns + m.grant().ns + x.ns + static_cast<std::int64_t>(m.reference_wire_ns) == s);
  }
  CHECK(m.max_crossbar().ns == 290);
}

TEST_CASE("buffer layout reserves per class and virtual channel") {
  QosConfig q;
  q.classes = {{0, "a", {}, 0, 0.8, 1.0, false, true, {}}, {1, "b", {}, 0, 0.1, 1.0, false, true, {}}};
  const BufferLayout l(q, 256 * 1024, 6, 4158);
  std::uint64_t reserved = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::uint32_t v = 0; v < 6; ++v) {
      CHECK(l.reserved(c, v) >= 4158);
      reserved += l.reserved(c, v);
    }
  }
  CHECK(reserved + l.shared() == l.total());
  CHECK(l.class_reserved(0) > l.class_reserved(1));
  CHECK_THROWS_AS(BufferLayout(q, 8192, 6, 4158), ConfigError);
}

TEST_CASE("credit mirror charges reserved space first") {
  const auto q = default_qos();
  const BufferLayout l(q, 64 * 1024, 2, 4158);
  CreditMirror m(l);
  const auto res = m.reserved_free(0, 0);
  Charge c;
  std::uint32_t used = 0;
  while (m.reserved_free(0, 0) >= 4158) {
    REQUIRE(m.try_charge(0, 0, 4158, c));
    CHECK(c.shared == 0);
    used += 4158;
  }
  REQUIRE(m.try_charge(0, 0, 4158, c));
  CHECK(c.shared == 4158);
  std::vector<Charge> taken{c};
  while (m.try_charge(0, 0, 4158, c)) taken.push_back(c);
  CHECK(!m.can_charge(0, 0, 4158));
  CHECK(m.can_charge(0, 1, 4158));  // the other channel still has its reservation
  for (auto t : taken) m.refund(0, 0, t);
  CHECK(m.shared_free() == l.shared());
  CHECK(m.reserved_free(0, 0) == res - used);
}

TEST_CASE("round robin gives sixteen inputs equal service") {
  RoundRobin rr;
  std::vector<int> grants(64, 0);
  const std::uint64_t requests = 0x5555'5555ULL;  // 16 inputs on even ports
  for (int slot = 0; slot < 160; ++slot) ++grants[rr.pick(requests)];
  for (int p = 0; p < 64; ++p) {
    if ((requests >> p) & 1U) {
      CHECK(grants[p] >= 9);
      CHECK(grants[p] <= 11);
    } else {
      CHECK(grants[p] == 0);
    }
  }
  CHECK(rr.pick(0) == kInvalidId);
  RoundRobin single;
  CHECK(single.pick(1ULL << 63) == 63);
  CHECK(single.pick(1ULL << 63) == 63);
}
