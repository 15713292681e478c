#include "dflysim/qos.hpp"

#include <algorithm>
#include <cmath>

namespace dflysim {

namespace {
constexpr double kEps = 1e-12;
}

std::size_t QosConfig::index_of(ClassId id) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].id == id) return i;
  }
  throw QosError(QosError::Kind::InvalidClass, "unknown traffic class id " + std::to_string(id));
}

QosConfig default_qos() {
  QosConfig cfg;
  TrafficClassSpec tc;
  tc.id = 0;
  tc.name = "best_effort";
  tc.min_bw = 0.0;
  tc.max_bw = 1.0;
  cfg.classes.push_back(tc);
  cfg.default_class = 0;
  return cfg;
}

void validate(const QosConfig& cfg) {
  if (cfg.classes.empty()) throw QosError(QosError::Kind::InvalidClass, "at least one traffic class is required");
  if (cfg.classes.size() > 16) throw QosError(QosError::Kind::InvalidClass, "at most 16 traffic classes are supported");
  double min_sum = 0.0;
  std::set<std::uint8_t> seen_dscp;
  std::set<ClassId> seen_ids;
  for (const auto& tc : cfg.classes) {
    if (!seen_ids.insert(tc.id).second) {
      throw QosError(QosError::Kind::InvalidClass, "duplicate traffic class id " + std::to_string(tc.id));
    }
    if (tc.min_bw < 0.0 || tc.max_bw <= 0.0 || tc.max_bw > 1.0) {
      throw QosError(QosError::Kind::InvalidClass, "class " + std::to_string(tc.id) + ": bandwidth fractions out of range");
    }
    if (tc.min_bw > tc.max_bw + kEps) {
      throw QosError(QosError::Kind::MinExceedsMax, "class " + std::to_string(tc.id) + ": min_bw exceeds max_bw");
    }
    for (auto d : tc.dscp_values) {
      if (d > 63) throw QosError(QosError::Kind::InvalidClass, "DSCP values are 0..63");
      if (!seen_dscp.insert(d).second) {
        throw QosError(QosError::Kind::OverlappingDscp, "DSCP " + std::to_string(d) + " maps to more than one class");
      }
    }
    min_sum += tc.min_bw;
  }
  if (min_sum > 1.0 + 1e-9) {
    throw QosError(QosError::Kind::OverSubscribedMin, "minimum bandwidth guarantees sum to " + std::to_string(min_sum));
  }
  (void)cfg.index_of(cfg.default_class);
}

ClassId classify(const QosConfig& cfg, std::uint8_t dscp) {
  for (const auto& tc : cfg.classes) {
    if (tc.dscp_values.contains(dscp)) return tc.id;
  }
  return cfg.default_class;
}

std::vector<double> allocate_shares(const QosConfig& cfg, const std::vector<ClassId>& backlogged) {
  std::vector<double> shares(cfg.classes.size(), 0.0);
  std::vector<bool> active(cfg.classes.size(), false);
  double remaining = 1.0;
  for (auto id : backlogged) {
    const std::size_t i = cfg.index_of(id);
    if (active[i]) continue;
    active[i] = true;
    shares[i] = cfg.classes[i].min_bw;
    remaining -= shares[i];
  }
  while (remaining > kEps) {
    std::optional<std::size_t> lowest;
    for (std::size_t i = 0; i < shares.size(); ++i) {
      if (!active[i] || shares[i] >= cfg.classes[i].max_bw - kEps) continue;
      if (!lowest || shares[i] < shares[*lowest] - kEps ||
          (std::abs(shares[i] - shares[*lowest]) <= kEps && cfg.classes[i].id < cfg.classes[*lowest].id)) {
        lowest = i;
      }
    }
    if (!lowest) break;
    const double give = std::min(remaining, cfg.classes[*lowest].max_bw - shares[*lowest]);
    shares[*lowest] += give;
    remaining -= give;
  }
  return shares;
}

LinkScheduler::LinkScheduler(const QosConfig& cfg, double bytes_per_ns, std::uint32_t max_frame_bytes)
    : cfg_(&cfg),
      bytes_per_ns_(bytes_per_ns),
      cap_(4.0 * max_frame_bytes),
      share_cache_(std::size_t{1} << cfg.classes.size()),
      shares_(cfg.classes.size(), 0.0),
      credit_(cfg.classes.size(), 0.0) {
  by_priority_.resize(cfg.classes.size());
  for (std::size_t i = 0; i < by_priority_.size(); ++i) by_priority_[i] = i;
  std::stable_sort(by_priority_.begin(), by_priority_.end(), [&](std::size_t a, std::size_t b) {
    if (cfg.classes[a].priority != cfg.classes[b].priority) return cfg.classes[a].priority > cfg.classes[b].priority;
    return cfg.classes[a].id < cfg.classes[b].id;
  });
}

void LinkScheduler::refresh_shares(std::uint32_t backlogged) {
  if (backlogged == share_mask_) return;
  auto& cached = share_cache_[backlogged];
  if (cached.empty()) {
    std::vector<ClassId> ids;
    for (std::size_t i = 0; i < cfg_->classes.size(); ++i) {
      if (backlogged & (1U << i)) ids.push_back(cfg_->classes[i].id);
    }
    cached = allocate_shares(*cfg_, ids);
  }
  shares_ = cached;
  for (std::size_t i = 0; i < credit_.size(); ++i) {
    // Idle classes keep any debt but do not bank credit.
    if (!(backlogged & (1U << i))) credit_[i] = std::min(credit_[i], 0.0);
  }
  share_mask_ = backlogged;
}

void LinkScheduler::accrue(SimTime now) {
  if (now <= last_) return;
  const double link_bytes = bytes_per_ns_ * static_cast<double>((now - last_).ns);
  for (std::size_t i = 0; i < credit_.size(); ++i) {
    if (share_mask_ & (1U << i)) credit_[i] = std::min(cap_, credit_[i] + shares_[i] * link_bytes);
  }
  last_ = now;
}

LinkScheduler::Decision LinkScheduler::pick(std::uint32_t eligible, std::uint32_t backlogged, SimTime now) {
  refresh_shares(backlogged);
  accrue(now);
  Decision d;
  for (auto i : by_priority_) {
    if ((eligible & (1U << i)) && credit_[i] > 0.0) {
      d.class_index = i;
      return d;
    }
  }
  // Work-conserving fallback; classes pinned at a maximum below line rate must wait for credit.
  for (auto i : by_priority_) {
    if (!(eligible & (1U << i))) continue;
    const bool rate_capped = cfg_->classes[i].max_bw < 1.0 - kEps && shares_[i] >= cfg_->classes[i].max_bw - kEps;
    if (rate_capped) {
      const double rate = shares_[i] * bytes_per_ns_;
      if (rate > 0.0) {
        const auto wait = static_cast<std::int64_t>(std::ceil((-credit_[i] + 1.0) / rate));
        d.retry_at = std::min(d.retry_at, now + SimTime{std::max<std::int64_t>(wait, 1)});
      }
      continue;
    }
    if (!d.class_index || credit_[i] > credit_[*d.class_index]) d.class_index = i;
  }
  if (d.class_index) d.retry_at = SimTime::max();
  return d;
}

void LinkScheduler::on_sent(std::size_t class_index, std::uint32_t bytes) {
  credit_[class_index] = std::max(-cap_, credit_[class_index] - static_cast<double>(bytes));
}

}  // namespace dflysim
