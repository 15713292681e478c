#pragma once

#include <cstdint>
#include <vector>

#include "dflysim/core.hpp"
#include "dflysim/qos.hpp"

namespace dflysim {

inline constexpr std::uint32_t kTileRows = 4;
inline constexpr std::uint32_t kTileCols = 8;
inline constexpr std::uint32_t kPortsPerTile = 2;

struct TileCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const TileCoord&, const TileCoord&) = default;
};

// Throws std::out_of_range for ports outside 0..63.
TileCoord tile_of_port(PortId port);

// Crossbar hops from an input to an output: one over the row bus, a second down a column channel
// when the output tile sits in another row.
std::uint32_t internal_hops(PortId in_port, PortId out_port);

// Per-switch latency. The traversal sample covers one switch plus the short copper hop that a
// bench measurement includes, so request + grant + crossbar + reference wire == sample.
struct SwitchLatencyModel {
  double min_ns = 300.0;
  double max_ns = 400.0;
  double request_ns = 50.0;
  double grant_ns = 50.0;
  double reference_wire_ns = 10.0;

  [[nodiscard]] SimTime request() const { return SimTime{static_cast<std::int64_t>(request_ns)}; }
  [[nodiscard]] SimTime grant() const { return SimTime{static_cast<std::int64_t>(grant_ns)}; }
  // Crossbar transfer time left after the handshake and the reference wire are accounted for.
  [[nodiscard]] SimTime crossbar(SimTime traversal) const;
  [[nodiscard]] SimTime max_crossbar() const;
};

// Uniform draw from [min_ns, max_ns], rounded to whole nanoseconds.
SimTime traversal_latency(const SwitchLatencyModel& model, Rng& rng);

inline constexpr std::uint32_t kDefaultInputBufferBytes = 256 * 1024;

// How one input buffer is carved up: a reserved slice per (class, virtual channel) and a shared
// pool. Virtual channels follow the hop index along a path, which keeps credit dependencies acyclic.
class BufferLayout {
 public:
  BufferLayout() = default;
  BufferLayout(const QosConfig& qos, std::uint32_t buffer_bytes, std::uint32_t num_vcs, std::uint32_t max_frame);

  [[nodiscard]] std::uint32_t num_classes() const { return num_classes_; }
  [[nodiscard]] std::uint32_t num_vcs() const { return num_vcs_; }
  [[nodiscard]] std::uint32_t reserved(std::size_t cls, std::uint32_t vc) const {
    return reserved_[cls * num_vcs_ + vc];
  }
  [[nodiscard]] std::uint32_t class_reserved(std::size_t cls) const;
  [[nodiscard]] std::uint32_t shared() const { return shared_; }
  [[nodiscard]] std::uint32_t total() const { return total_; }

 private:
  std::uint32_t num_classes_ = 0;
  std::uint32_t num_vcs_ = 0;
  std::uint32_t total_ = 0;
  std::uint32_t shared_ = 0;
  std::vector<std::uint32_t> reserved_;
};

struct Charge {
  std::uint32_t reserved = 0;
  std::uint32_t shared = 0;
};

// Sender-side view of the free space in the downstream input buffer (lossless classes).
class CreditMirror {
 public:
  CreditMirror() = default;
  explicit CreditMirror(const BufferLayout& layout);

  [[nodiscard]] bool can_charge(std::size_t cls, std::uint32_t vc, std::uint32_t bytes) const;
  // Reserved space first, then the shared pool. Returns false and changes nothing if neither fits.
  bool try_charge(std::size_t cls, std::uint32_t vc, std::uint32_t bytes, Charge& out);
  void refund(std::size_t cls, std::uint32_t vc, Charge c);

  [[nodiscard]] std::uint32_t reserved_free(std::size_t cls, std::uint32_t vc) const {
    return reserved_free_[cls * num_vcs_ + vc];
  }
  [[nodiscard]] std::uint32_t shared_free() const { return shared_free_; }

 private:
  std::uint32_t num_vcs_ = 0;
  std::vector<std::uint32_t> reserved_free_;
  std::uint32_t shared_free_ = 0;
};

// Round-robin choice among requesting inputs of one class. Ports are bit positions.
class RoundRobin {
 public:
  // Returns the first set bit of `requests` at or after the pointer (wrapping) and moves the pointer
  // past it; kInvalidId if `requests` is empty.
  std::uint32_t pick(std::uint64_t requests);
  [[nodiscard]] std::uint32_t pointer() const { return next_; }

 private:
  std::uint32_t next_ = 0;
};

// Class and input chosen for one output service slot: the QoS scheduler picks the class, then
// round-robin picks among that class's requesting inputs.
struct GrantDecision {
  std::size_t class_index = 0;
  std::uint32_t input = kInvalidId;
};

}  // namespace dflysim
