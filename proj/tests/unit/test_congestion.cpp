#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "dflysim/congestion.hpp"

using namespace dflysim;

namespace {

constexpr std::uint32_t kFrame = 4158;

CcConfig config(std::uint32_t window_frames = 16) {
  CcConfig c;
  c.default_window_frames = window_frames;
  return c;
}

}  // namespace

TEST_CASE("admission follows the window") {
  CongestionControl cc(config(2), kFrame, 200);
  CHECK(cc.default_window() == 2 * kFrame);
  CHECK(cc.on_inject(0, 1, 1, kFrame, SimTime{0}) == CongestionControl::Admission::Admit);
  CHECK(cc.pair(0, 1)->outstanding_bytes == kFrame);
  CHECK(cc.on_inject(0, 1, 2, kFrame, SimTime{0}) == CongestionControl::Admission::Admit);
  CHECK(cc.on_inject(0, 1, 3, kFrame, SimTime{0}) == CongestionControl::Admission::Defer);
  CHECK(!cc.would_admit(0, 1));
  CHECK(cc.would_admit(0, 2));
  CHECK(cc.on_ack(1, SimTime{100}) == CongestionControl::AckResult::Ok);
  CHECK(cc.would_admit(0, 1));
  CHECK(cc.on_inject(0, 1, 3, kFrame, SimTime{100}) == CongestionControl::Admission::Admit);
}

TEST_CASE("acks in any order drain the pair") {
  CongestionControl cc(config(), kFrame, 200);
  for (std::uint64_t id = 0; id < 10; ++id) cc.on_inject(0, 1, id, 1000, SimTime{0});
  CHECK(cc.pair(0, 1)->outstanding_packets == 10);
  std::vector<std::uint64_t> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  std::swap(order[2], order[7]);
  for (auto id : order) cc.on_ack(id, SimTime{50});
  CHECK(cc.pair(0, 1)->outstanding_packets == 0);
  CHECK(cc.pair(0, 1)->outstanding_bytes == 0);
  CHECK(cc.aggregate(1) == 0);
  CHECK(cc.on_ack(3, SimTime{60}) == CongestionControl::AckResult::Duplicate);
  CHECK(cc.duplicate_acks() == 1);
  CHECK(cc.pair(0, 1)->outstanding_packets == 0);
}

TEST_CASE("threshold is twice the bandwidth-delay product") {
  CongestionControl cc(config(), kFrame, 200);
  CHECK(cc.threshold() == 100000);  // 25 B/ns * 2000 ns * 2
}

TEST_CASE("incast classification") {
  CongestionControl cc(config(64), kFrame, 200);
  std::uint64_t id = 0;
  for (EndpointId s = 2; s < 34; ++s) {
    for (int k = 0; k < 4; ++k) cc.on_inject(s, 1, id++, kFrame, SimTime{0});
  }
  cc.on_inject(40, 41, id++, kFrame, SimTime{0});
  CHECK(cc.congested(1));
  CHECK(!cc.congested(41));
  const auto c = cc.classify(1);
  CHECK(c.contributors.size() == 32);
  CHECK(c.victims.contains(PairKey{40, 41}));
  CHECK(cc.classify(41).contributors.empty());
  CHECK(cc.classify(41).victims.empty());
  // A second incast: contributor sets are disjoint by destination.
  for (EndpointId s = 50; s < 82; ++s) {
    for (int k = 0; k < 4; ++k) cc.on_inject(s, 2, id++, kFrame, SimTime{0});
  }
  const auto c2 = cc.classify(2);
  for (const auto& p : c2.contributors) CHECK(!c.contributors.contains(p));
}

TEST_CASE("multiplicative cut, floor and additive recovery") {
  CongestionControl cc(config(16), kFrame, 200);
  std::vector<WindowChange> log;
  cc.set_log(&log);
  std::uint64_t id = 0;
  // 30 frames queued at one destination from two sources puts it over the threshold.
  for (int k = 0; k < 15; ++k) cc.on_inject(0, 9, id++, kFrame, SimTime{0});
  for (int k = 0; k < 15; ++k) cc.on_inject(1, 9, id++, kFrame, SimTime{0});
  cc.on_inject(5, 6, id++, kFrame, SimTime{0});
  REQUIRE(cc.congested(9));
  cc.on_ack(0, SimTime{1000});
  CHECK(cc.window(0, 9) == 8 * kFrame);
  // One cut per tick interval.
  cc.on_ack(1, SimTime{1500});
  CHECK(cc.window(0, 9) == 8 * kFrame);
  cc.on_ack(2, SimTime{3000});
  CHECK(cc.window(0, 9) == 4 * kFrame);
  cc.on_ack(3, SimTime{5000});
  cc.on_ack(4, SimTime{7000});
  CHECK(cc.window(0, 9) == kFrame);
  cc.on_ack(5, SimTime{9000});
  CHECK(cc.window(0, 9) == kFrame);
  // The bystander pair is never throttled.
  CHECK(cc.window(5, 6) == 16 * kFrame);
  for (const auto& w : log) CHECK(w.pair.dst == 9);
  for (std::uint64_t i = 6; i < id; ++i) cc.on_ack(i, SimTime{50000});
  CHECK(cc.aggregate(9) == 0);
  const auto before = cc.window(0, 9);
  for (int t = 1; t <= 10; ++t) cc.tick(SimTime{50000 + 2000 * t});
  CHECK(cc.window(0, 9) == before + 10 * kFrame);
  for (int t = 11; t <= 20; ++t) cc.tick(SimTime{50000 + 2000 * t});
  CHECK(cc.window(0, 9) == 16 * kFrame);
  CHECK(!cc.needs_tick());
}

TEST_CASE("window at the floor stays there") {
  CcConfig c = config(1);
  CongestionControl cc(c, kFrame, 200);
  std::uint64_t id = 0;
  for (EndpointId s = 0; s < 40; ++s) cc.on_inject(s, 99, id++, kFrame, SimTime{0});
  cc.on_ack(0, SimTime{10});
  CHECK(cc.window(0, 99) == kFrame);
}

TEST_CASE("64 KiB window halves to 32 KiB") {
  CcConfig c;
  c.default_window_frames = 16;
  CongestionControl cc(c, 4096, 200);
  CHECK(cc.default_window() == 65536);
  std::uint64_t id = 0;
  for (EndpointId s = 0; s < 30; ++s) cc.on_inject(s, 99, id++, 4096, SimTime{0});
  cc.on_ack(0, SimTime{10});
  CHECK(cc.window(0, 99) == 32768);
}

TEST_CASE("disabled control never defers") {
  CcConfig c;
  c.enabled = false;
  CongestionControl cc(c, kFrame, 200);
  for (std::uint64_t i = 0; i < 1000; ++i) CHECK(cc.on_inject(0, 1, i, kFrame, SimTime{0}) == CongestionControl::Admission::Admit);
  CHECK(!cc.congested(1));
  CHECK(cc.tick(SimTime{2000}).empty());
}

TEST_CASE("bad constants are rejected") {
  CcConfig c;
  c.decrease = 1.0;
  CHECK_THROWS_AS(CongestionControl(c, kFrame, 200), ConfigError);
  c = CcConfig{};
  c.tick = SimTime{0};
  CHECK_THROWS_AS(CongestionControl(c, kFrame, 200), ConfigError);
}
