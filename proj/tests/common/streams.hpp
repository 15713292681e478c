#pragma once

#include <cstdint>
#include <vector>

#include "dflysim/network.hpp"

namespace dflysim::testing {

struct Flow {
  EndpointId src = 0;
  EndpointId dst = 0;
  ClassId tclass = 0;
  std::uint64_t bytes = 65536;
};

// Back-to-back message streams. Each flow keeps `depth` messages queued at its NIC until
// `stop_posting`, and counts payload received inside the measurement window.
class Streams : public MessageListener {
 public:
  Streams(Network& net, std::vector<Flow> flows, std::uint32_t job = 0, unsigned depth = 2)
      : net_(&net), flows_(std::move(flows)), depth_(depth), received_(flows_.size(), 0) {
    id_ = net.add_listener(this, job);
  }

  void start(SimTime stop_posting) {
    stop_ = stop_posting;
    for (std::size_t f = 0; f < flows_.size(); ++f) {
      for (unsigned k = 0; k < depth_; ++k) post(f);
    }
  }
  void measure(SimTime from, SimTime to) {
    from_ = from;
    to_ = to;
  }

  void on_sent(const MessageInfo& m) override {
    if (net_->now() < stop_) post(m.tag);
  }
  void on_received(const MessageInfo& m) override {
    if (m.received >= from_ && m.received < to_) received_[m.tag] += m.bytes;
  }

  [[nodiscard]] double gbps(std::size_t flow) const {
    return static_cast<double>(received_[flow]) * 8.0 / static_cast<double>((to_ - from_).ns);
  }
  [[nodiscard]] std::uint64_t received(std::size_t flow) const { return received_[flow]; }

 private:
  void post(std::size_t f) {
    const auto& fl = flows_[f];
    net_->post(id_, fl.src, fl.dst, fl.bytes, fl.tclass, f);
  }

  Network* net_;
  std::vector<Flow> flows_;
  unsigned depth_;
  std::uint32_t id_ = 0;
  SimTime stop_{};
  SimTime from_{};
  SimTime to_ = SimTime::max();
  std::vector<std::uint64_t> received_;
};

}  // namespace dflysim::testing
