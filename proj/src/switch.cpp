#include "dflysim/switch.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dflysim {

TileCoord tile_of_port(PortId port) {
  if (port >= kTileRows * kTileCols * kPortsPerTile) {
    throw std::out_of_range("port " + std::to_string(port) + " is outside 0..63");
  }
  const std::uint32_t t = port / kPortsPerTile;
  return TileCoord{t / kTileCols, t % kTileCols};
}

std::uint32_t internal_hops(PortId in_port, PortId out_port) {
  const TileCoord a = tile_of_port(in_port);
  const TileCoord b = tile_of_port(out_port);
  return a.row == b.row ? 1 : 2;
}

SimTime SwitchLatencyModel::crossbar(SimTime traversal) const {
  const double rest = static_cast<double>(traversal.ns) - request_ns - grant_ns - reference_wire_ns;
  return SimTime{std::max<std::int64_t>(0, std::llround(rest))};
}

SimTime SwitchLatencyModel::max_crossbar() const {
  return crossbar(SimTime{static_cast<std::int64_t>(std::ceil(max_ns))});
}

SimTime traversal_latency(const SwitchLatencyModel& model, Rng& rng) {
  if (model.max_ns <= model.min_ns) return SimTime{std::llround(model.min_ns)};
  const double v = model.min_ns + uniform01(rng) * (model.max_ns - model.min_ns);
  return SimTime{std::llround(v)};
}

BufferLayout::BufferLayout(const QosConfig& qos, std::uint32_t buffer_bytes, std::uint32_t num_vcs,
                           std::uint32_t max_frame)
    : num_classes_(static_cast<std::uint32_t>(qos.classes.size())), num_vcs_(num_vcs), total_(buffer_bytes) {
  double min_sum = 0.0;
  for (const auto& tc : qos.classes) min_sum += tc.min_bw;
  const double half = buffer_bytes / 2.0;
  reserved_.assign(static_cast<std::size_t>(num_classes_) * num_vcs_, 0);
  std::uint64_t used = 0;
  for (std::uint32_t c = 0; c < num_classes_; ++c) {
    const double weight = min_sum > 0.0 ? qos.classes[c].min_bw / min_sum : 1.0 / num_classes_;
    const auto slice = static_cast<std::uint32_t>(weight * half / num_vcs_);
    for (std::uint32_t v = 0; v < num_vcs_; ++v) {
      reserved_[c * num_vcs_ + v] = std::max(max_frame, slice);
      used += reserved_[c * num_vcs_ + v];
    }
  }
  if (used > buffer_bytes) {
    throw ConfigError("input buffer of " + std::to_string(buffer_bytes) + " bytes cannot reserve one maximum frame per class and virtual channel (" +
                      std::to_string(used) + " bytes needed)");
  }
  shared_ = static_cast<std::uint32_t>(buffer_bytes - used);
}

std::uint32_t BufferLayout::class_reserved(std::size_t cls) const {
  std::uint32_t sum = 0;
  for (std::uint32_t v = 0; v < num_vcs_; ++v) sum += reserved(cls, v);
  return sum;
}

CreditMirror::CreditMirror(const BufferLayout& layout)
    : num_vcs_(layout.num_vcs()), shared_free_(layout.shared()) {
  reserved_free_.resize(static_cast<std::size_t>(layout.num_classes()) * num_vcs_);
  for (std::uint32_t c = 0; c < layout.num_classes(); ++c) {
    for (std::uint32_t v = 0; v < num_vcs_; ++v) reserved_free_[c * num_vcs_ + v] = layout.reserved(c, v);
  }
}

bool CreditMirror::can_charge(std::size_t cls, std::uint32_t vc, std::uint32_t bytes) const {
  return reserved_free_[cls * num_vcs_ + vc] >= bytes || shared_free_ >= bytes;
}

bool CreditMirror::try_charge(std::size_t cls, std::uint32_t vc, std::uint32_t bytes, Charge& out) {
  auto& r = reserved_free_[cls * num_vcs_ + vc];
  if (r >= bytes) {
    r -= bytes;
    out = Charge{bytes, 0};
    return true;
  }
  if (shared_free_ >= bytes) {
    shared_free_ -= bytes;
    out = Charge{0, bytes};
    return true;
  }
  return false;
}

void CreditMirror::refund(std::size_t cls, std::uint32_t vc, Charge c) {
  reserved_free_[cls * num_vcs_ + vc] += c.reserved;
  shared_free_ += c.shared;
}

std::uint32_t RoundRobin::pick(std::uint64_t requests) {
  if (requests == 0) return kInvalidId;
  const std::uint32_t start = next_ & 63U;
  const std::uint64_t rotated = std::rotr(requests, static_cast<int>(start));
  const auto winner = static_cast<std::uint32_t>((start + std::countr_zero(rotated)) & 63U);
  next_ = winner + 1;
  return winner;
}

}  // namespace dflysim
