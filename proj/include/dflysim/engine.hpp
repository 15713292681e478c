#pragma once

#include <cstdint>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "dflysim/core.hpp"

namespace dflysim {

// Thrown when an event is scheduled before the current simulated clock.
class CausalityViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Event {
  SimTime time;
  std::uint64_t seq = 0;
  std::uint32_t target = 0;
  std::uint32_t kind = 0;
  std::uint64_t a = 0;
  std::uint64_t b = 0;
};

// Deterministic event queue. Events pop in (time, insertion order) order.
class EventQueue {
 public:
  std::uint64_t schedule(SimTime time, std::uint32_t target, std::uint32_t kind, std::uint64_t a = 0,
                         std::uint64_t b = 0);

  // Removes the earliest event and advances the clock to its timestamp.
  Event pop();

  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] std::size_t size() const { return heap_.size(); }
  [[nodiscard]] SimTime now() const { return now_; }
  [[nodiscard]] SimTime next_time() const { return heap_.top().time; }
  [[nodiscard]] std::uint64_t processed() const { return processed_; }

 private:
  struct Later {
    bool operator()(const Event& x, const Event& y) const {
      if (x.time != y.time) return x.time > y.time;
      return x.seq > y.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> heap_;
  SimTime now_{};
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
};

enum class FrameMode { RoCE, Enhanced };

FrameMode parse_frame_mode(const std::string& s);
std::string to_string(FrameMode m);

inline constexpr std::uint32_t kRoceOverheadBytes = 62;      // Eth 26 + IPv4 20 + UDP 8 + IB 14 + CRC 4
inline constexpr std::uint32_t kEthernetHeaderBytes = 26;    // dropped by the enhanced protocol
inline constexpr std::uint32_t kRoceMinFrameBytes = 64;
inline constexpr std::uint32_t kEnhancedMinFrameBytes = 32;
inline constexpr std::uint32_t kInterPacketGapBytes = 20;    // preamble + IFG charged by standard Ethernet

// Wire bytes for a packet carrying `payload_bytes`. Throws std::invalid_argument above 4096.
std::uint32_t frame_overhead(FrameMode mode, std::uint32_t payload_bytes);
std::uint32_t min_frame_bytes(FrameMode mode);
inline std::uint32_t max_frame_bytes(FrameMode mode) { return frame_overhead(mode, kMaxPayloadBytes); }

enum class Medium { Copper, Optical };

enum class LinkEndKind { Nic, SwitchPort };

struct LinkEnd {
  LinkEndKind kind = LinkEndKind::SwitchPort;
  std::uint32_t id = 0;    // endpoint id or switch id
  PortId port = 0;         // switch port (0 for NIC ends)
};

struct Link {
  LinkId id = 0;
  double bandwidth_gbps = 200.0;
  double propagation_ns = 10.0;
  Medium medium = Medium::Copper;
  LinkEnd a;
  LinkEnd b;
};

// Exact transit duration in (fractional) nanoseconds: serialization plus propagation.
// Standard RoCE framing also pays the inter-packet gap on the serialization term.
double link_transit(const Link& link, std::uint32_t frame_bytes, FrameMode mode);

// Converts fractional serialization times to integer clock ticks, carrying the sub-ns remainder
// forward so long runs do not drift from the exact line rate.
class LinkSerializer {
 public:
  LinkSerializer() = default;
  LinkSerializer(double bandwidth_gbps, FrameMode mode) : gbps_(bandwidth_gbps), mode_(mode) {}

  SimTime serialize(std::uint32_t frame_bytes);
  [[nodiscard]] double exact_ns(std::uint32_t frame_bytes) const;
  [[nodiscard]] double bandwidth_gbps() const { return gbps_; }

 private:
  double gbps_ = 200.0;
  FrameMode mode_ = FrameMode::RoCE;
  double carry_ = 0.0;
};

}  // namespace dflysim
