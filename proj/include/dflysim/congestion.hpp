#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>
#include <vector>

#include "dflysim/core.hpp"

namespace dflysim {

struct CcConfig {
  bool enabled = true;
  double threshold_bdp_multiple = 2.0;
  double base_rtt_ns = 2000.0;
  double decrease = 0.5;
  std::uint32_t increase_frames = 1;
  SimTime tick{2000};
  std::uint32_t default_window_frames = 24;  // just under the threshold: a lone pair never trips it
};

struct PairKey {
  EndpointId src = 0;
  EndpointId dst = 0;
  friend auto operator<=>(const PairKey&, const PairKey&) = default;
};

struct PairState {
  std::uint64_t outstanding_packets = 0;
  std::uint64_t outstanding_bytes = 0;
  std::uint64_t window = 0;  // bytes
  SimTime last_cut{-1};
  SimTime last_rtt{};
  std::uint64_t rtt_samples = 0;
};

struct Classification {
  std::set<PairKey> victims;
  std::set<PairKey> contributors;
};

struct WindowChange {
  SimTime time;
  PairKey pair;
  std::uint64_t old_window = 0;
  std::uint64_t new_window = 0;
  bool decrease = false;
};

// End-to-end congestion control: per endpoint-pair in-flight tracking with window throttling of
// the pairs feeding a congested destination.
class CongestionControl {
 public:
  enum class Admission { Admit, Defer };
  enum class AckResult { Ok, Duplicate };

  CongestionControl() = default;
  CongestionControl(const CcConfig& cfg, std::uint32_t max_frame_bytes, double access_gbps);

  // Admits (and starts tracking) a packet when the pair is under its window.
  Admission on_inject(EndpointId src, EndpointId dst, std::uint64_t packet_id, std::uint32_t frame_bytes, SimTime now);
  [[nodiscard]] bool would_admit(EndpointId src, EndpointId dst) const;

  // Ends tracking of `packet_id`; cuts the pair's window when its destination is congested.
  AckResult on_ack(std::uint64_t packet_id, SimTime now);
  // Forgets a pair with nothing in flight, so its next message starts from the default window.
  // Returns false if the pair still has outstanding packets.
  bool release(EndpointId src, EndpointId dst);

  // Additive recovery for pairs whose destination has drained. Returns pairs whose window grew.
  std::vector<PairKey> tick(SimTime now);
  [[nodiscard]] bool needs_tick() const { return enabled() && !throttled_.empty(); }

  [[nodiscard]] bool congested(EndpointId dst) const;
  [[nodiscard]] Classification classify(EndpointId dst) const;

  [[nodiscard]] const PairState* pair(EndpointId src, EndpointId dst) const;
  [[nodiscard]] std::uint64_t window(EndpointId src, EndpointId dst) const;
  [[nodiscard]] std::uint64_t aggregate(EndpointId dst) const;
  [[nodiscard]] std::uint64_t threshold() const { return threshold_; }
  [[nodiscard]] std::uint64_t default_window() const { return default_window_; }
  [[nodiscard]] std::uint64_t floor_window() const { return max_frame_; }
  [[nodiscard]] std::uint64_t duplicate_acks() const { return duplicate_acks_; }
  [[nodiscard]] std::uint64_t in_flight() const { return inflight_.size(); }
  [[nodiscard]] bool enabled() const { return cfg_.enabled; }
  [[nodiscard]] const CcConfig& config() const { return cfg_; }

  void set_log(std::vector<WindowChange>* log) { log_ = log; }

 private:
  struct InFlight {
    PairKey pair;
    std::uint32_t bytes;
    SimTime sent;
  };
  static std::uint64_t key(EndpointId s, EndpointId d) { return (static_cast<std::uint64_t>(s) << 32) | d; }
  PairState& state(EndpointId s, EndpointId d);
  void set_window(PairState& ps, PairKey k, std::uint64_t w, SimTime now, bool decrease);

  CcConfig cfg_;
  std::uint64_t max_frame_ = 4158;
  std::uint64_t default_window_ = 0;
  std::uint64_t threshold_ = 0;
  std::unordered_map<std::uint64_t, PairState> pairs_;
  std::unordered_map<EndpointId, std::uint64_t> aggregate_;
  std::unordered_map<std::uint64_t, InFlight> inflight_;
  std::set<PairKey> throttled_;  // ordered by (src, dst) so recovery order is deterministic
  std::uint64_t duplicate_acks_ = 0;
  std::vector<WindowChange>* log_ = nullptr;
};

void write_window_log(std::ostream& out, const std::vector<WindowChange>& log);

}  // namespace dflysim
