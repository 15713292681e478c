#include "dflysim/engine.hpp"

#include <cmath>
#include <sstream>

namespace dflysim {

std::uint64_t EventQueue::schedule(SimTime time, std::uint32_t target, std::uint32_t kind, std::uint64_t a,
                                   std::uint64_t b) {
  if (time < now_) {
    std::ostringstream msg;
    msg << "event scheduled in the past: t=" << time.ns << "ns, clock=" << now_.ns << "ns, kind=" << kind
        << ", target=" << target;
    throw CausalityViolation(msg.str());
  }
  const std::uint64_t id = next_seq_++;
  heap_.push(Event{time, id, target, kind, a, b});
  return id;
}

Event EventQueue::pop() {
  Event ev = heap_.top();
  heap_.pop();
  now_ = ev.time;
  ++processed_;
  return ev;
}

FrameMode parse_frame_mode(const std::string& s) {
  if (s == "roce" || s == "RoCE") return FrameMode::RoCE;
  if (s == "enhanced" || s == "Enhanced") return FrameMode::Enhanced;
  throw ConfigError("unknown frame mode '" + s + "' (expected roce|enhanced)");
}

std::string to_string(FrameMode m) { return m == FrameMode::RoCE ? "roce" : "enhanced"; }

std::uint32_t min_frame_bytes(FrameMode mode) {
  return mode == FrameMode::RoCE ? kRoceMinFrameBytes : kEnhancedMinFrameBytes;
}

std::uint32_t frame_overhead(FrameMode mode, std::uint32_t payload_bytes) {
  if (payload_bytes > kMaxPayloadBytes) {
    throw std::invalid_argument("payload of " + std::to_string(payload_bytes) +
                                " bytes exceeds the 4096-byte packet limit; segment first");
  }
  if (mode == FrameMode::RoCE) return std::max(payload_bytes + kRoceOverheadBytes, kRoceMinFrameBytes);
  return std::max(payload_bytes + kRoceOverheadBytes - kEthernetHeaderBytes, kEnhancedMinFrameBytes);
}

namespace {
double serialization_ns(double gbps, std::uint32_t frame_bytes, FrameMode mode) {
  const std::uint32_t wire = frame_bytes + (mode == FrameMode::RoCE ? kInterPacketGapBytes : 0);
  return static_cast<double>(wire) * 8.0 / gbps;
}
}  // namespace

double link_transit(const Link& link, std::uint32_t frame_bytes, FrameMode mode) {
  return serialization_ns(link.bandwidth_gbps, frame_bytes, mode) + link.propagation_ns;
}

double LinkSerializer::exact_ns(std::uint32_t frame_bytes) const {
  return serialization_ns(gbps_, frame_bytes, mode_);
}

SimTime LinkSerializer::serialize(std::uint32_t frame_bytes) {
  const double exact = exact_ns(frame_bytes) + carry_;
  const double whole = std::floor(exact);
  carry_ = exact - whole;
  return SimTime{static_cast<std::int64_t>(whole)};
}

}  // namespace dflysim
