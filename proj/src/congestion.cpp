#include "dflysim/congestion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dflysim {

CongestionControl::CongestionControl(const CcConfig& cfg, std::uint32_t max_frame_bytes, double access_gbps)
    : cfg_(cfg), max_frame_(max_frame_bytes) {
  if (cfg.decrease <= 0.0 || cfg.decrease >= 1.0) throw ConfigError("cc.decrease must be in (0, 1)");
  if (cfg.tick.ns <= 0) throw ConfigError("cc.tick_ns must be > 0");
  if (cfg.default_window_frames == 0) throw ConfigError("cc.default_window_frames must be >= 1");
  default_window_ = cfg.enabled ? static_cast<std::uint64_t>(cfg.default_window_frames) * max_frame_
                                : std::numeric_limits<std::uint64_t>::max();
  const double bdp = access_gbps / 8.0 * cfg.base_rtt_ns;
  threshold_ = static_cast<std::uint64_t>(std::llround(cfg.threshold_bdp_multiple * bdp));
}

PairState& CongestionControl::state(EndpointId s, EndpointId d) {
  auto [it, fresh] = pairs_.try_emplace(key(s, d));
  if (fresh) it->second.window = default_window_;
  return it->second;
}

const PairState* CongestionControl::pair(EndpointId src, EndpointId dst) const {
  auto it = pairs_.find(key(src, dst));
  return it == pairs_.end() ? nullptr : &it->second;
}

std::uint64_t CongestionControl::window(EndpointId src, EndpointId dst) const {
  const auto* ps = pair(src, dst);
  return ps ? ps->window : default_window_;
}

std::uint64_t CongestionControl::aggregate(EndpointId dst) const {
  auto it = aggregate_.find(dst);
  return it == aggregate_.end() ? 0 : it->second;
}

bool CongestionControl::congested(EndpointId dst) const { return enabled() && aggregate(dst) > threshold_; }

bool CongestionControl::would_admit(EndpointId src, EndpointId dst) const {
  if (!enabled()) return true;
  const auto* ps = pair(src, dst);
  return ps == nullptr || ps->outstanding_bytes < ps->window;
}

CongestionControl::Admission CongestionControl::on_inject(EndpointId src, EndpointId dst, std::uint64_t packet_id,
                                                          std::uint32_t frame_bytes, SimTime now) {
  auto& ps = state(src, dst);
  if (enabled() && ps.outstanding_bytes >= ps.window) return Admission::Defer;
  ps.outstanding_bytes += frame_bytes;
  ++ps.outstanding_packets;
  aggregate_[dst] += frame_bytes;
  inflight_.emplace(packet_id, InFlight{PairKey{src, dst}, frame_bytes, now});
  return Admission::Admit;
}

void CongestionControl::set_window(PairState& ps, PairKey k, std::uint64_t w, SimTime now, bool decrease) {
  if (w == ps.window) return;
  if (log_) log_->push_back(WindowChange{now, k, ps.window, w, decrease});
  ps.window = w;
  if (w < default_window_) {
    throttled_.insert(k);
  } else {
    throttled_.erase(k);
  }
}

CongestionControl::AckResult CongestionControl::on_ack(std::uint64_t packet_id, SimTime now) {
  auto it = inflight_.find(packet_id);
  if (it == inflight_.end()) {
    ++duplicate_acks_;
    return AckResult::Duplicate;
  }
  const InFlight f = it->second;
  inflight_.erase(it);
  auto& ps = state(f.pair.src, f.pair.dst);
  ps.outstanding_bytes -= f.bytes;
  --ps.outstanding_packets;
  ps.last_rtt = now - f.sent;
  ++ps.rtt_samples;
  auto& agg = aggregate_[f.pair.dst];
  // The congestion test uses the load seen by this packet, including itself.
  const bool was_congested = enabled() && agg > threshold_;
  agg -= f.bytes;

  // One multiplicative cut per tick interval: acks of one window arrive together and should not
  // compound into a collapse.
  if (was_congested && (ps.last_cut.ns < 0 || now - ps.last_cut >= cfg_.tick)) {
    const auto cut = static_cast<std::uint64_t>(static_cast<double>(ps.window) * cfg_.decrease);
    ps.last_cut = now;
    set_window(ps, f.pair, std::max(max_frame_, cut), now, true);
  }
  return AckResult::Ok;
}

bool CongestionControl::release(EndpointId src, EndpointId dst) {
  auto it = pairs_.find(key(src, dst));
  if (it == pairs_.end()) return true;
  if (it->second.outstanding_packets != 0) return false;
  throttled_.erase(PairKey{src, dst});
  pairs_.erase(it);
  return true;
}

std::vector<PairKey> CongestionControl::tick(SimTime now) {
  std::vector<PairKey> grown;
  if (!enabled()) return grown;
  const std::uint64_t clear_level = threshold_ * 3 / 4;
  const std::vector<PairKey> snapshot(throttled_.begin(), throttled_.end());
  for (const auto& k : snapshot) {
    if (aggregate(k.dst) >= clear_level) continue;
    auto& ps = state(k.src, k.dst);
    const std::uint64_t w = std::min(default_window_, ps.window + cfg_.increase_frames * max_frame_);
    set_window(ps, k, w, now, false);
    grown.push_back(k);
  }
  return grown;
}

Classification CongestionControl::classify(EndpointId dst) const {
  Classification c;
  if (!congested(dst)) return c;
  for (const auto& [k, ps] : pairs_) {
    if (ps.outstanding_packets == 0) continue;
    const PairKey pk{static_cast<EndpointId>(k >> 32), static_cast<EndpointId>(k & 0xffffffffU)};
    if (pk.dst == dst) {
      c.contributors.insert(pk);
    } else {
      c.victims.insert(pk);
    }
  }
  return c;
}

void write_window_log(std::ostream& out, const std::vector<WindowChange>& log) {
  out << "time_ns,src,dst,old_window,new_window,direction\n";
  for (const auto& w : log) {
    out << w.time.ns << ',' << w.pair.src << ',' << w.pair.dst << ',' << w.old_window << ',' << w.new_window << ','
        << (w.decrease ? "decrease" : "increase") << '\n';
  }
}

}  // namespace dflysim
