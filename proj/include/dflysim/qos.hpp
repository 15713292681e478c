#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dflysim/core.hpp"

namespace dflysim {

struct TrafficClassSpec {
  ClassId id = 0;
  std::string name;
  std::set<std::uint8_t> dscp_values;
  int priority = 0;  // larger is served first
  double min_bw = 0.0;
  double max_bw = 1.0;
  bool ordered = false;
  bool lossless = true;
  std::optional<double> routing_bias_override;
};

struct QosConfig {
  std::vector<TrafficClassSpec> classes;
  ClassId default_class = 0;

  [[nodiscard]] std::size_t index_of(ClassId id) const;
  [[nodiscard]] const TrafficClassSpec& spec(ClassId id) const { return classes.at(index_of(id)); }
};

// A single lossless best-effort class owning all of the bandwidth.
QosConfig default_qos();

class QosError : public std::runtime_error {
 public:
  enum class Kind { OverSubscribedMin, OverlappingDscp, MinExceedsMax, InvalidClass };
  QosError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  [[nodiscard]] Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void validate(const QosConfig& cfg);

// Class for a packet carrying `dscp`; unmapped code points fall to the default class.
ClassId classify(const QosConfig& cfg, std::uint8_t dscp);

// Bandwidth fractions indexed like cfg.classes. Backlogged classes receive their minimum; what
// remains goes, a slice at a time, to the backlogged class holding the smallest share (lower id on
// ties) until it reaches its maximum or nothing is left. Idle classes get 0.
std::vector<double> allocate_shares(const QosConfig& cfg, const std::vector<ClassId>& backlogged);

// Deficit-weighted class selection for one output link. Credits accrue at share * line rate
// while a class is backlogged and are spent by the bytes it sends.
class LinkScheduler {
 public:
  LinkScheduler() = default;
  // `cfg` must outlive the scheduler.
  LinkScheduler(const QosConfig& cfg, double bytes_per_ns, std::uint32_t max_frame_bytes);

  struct Decision {
    std::optional<std::size_t> class_index;  // index into cfg.classes
    SimTime retry_at = SimTime::max();       // when a rate-capped class earns credit again
  };

  // `eligible` and `backlogged` are bitmasks over class indices. `now` is the link clock.
  Decision pick(std::uint32_t eligible, std::uint32_t backlogged, SimTime now);
  void on_sent(std::size_t class_index, std::uint32_t bytes);

  [[nodiscard]] const std::vector<double>& shares() const { return shares_; }
  [[nodiscard]] double credit(std::size_t class_index) const { return credit_[class_index]; }

 private:
  void accrue(SimTime now);
  void refresh_shares(std::uint32_t backlogged);

  const QosConfig* cfg_ = nullptr;
  double bytes_per_ns_ = 25.0;
  double cap_ = 0.0;
  SimTime last_{};
  std::uint32_t share_mask_ = ~0U;
  std::vector<std::vector<double>> share_cache_;  // indexed by backlog mask, filled lazily
  std::vector<double> shares_;
  std::vector<double> credit_;
  std::vector<std::size_t> by_priority_;
};

}  // namespace dflysim
