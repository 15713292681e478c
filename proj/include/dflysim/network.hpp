#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "dflysim/congestion.hpp"
#include "dflysim/core.hpp"
#include "dflysim/engine.hpp"
#include "dflysim/qos.hpp"
#include "dflysim/routing.hpp"
#include "dflysim/switch.hpp"
#include "dflysim/topology.hpp"

namespace dflysim {

struct NetworkConfig {
  FrameMode frame_mode = FrameMode::RoCE;
  SwitchLatencyModel latency;
  std::uint32_t buffer_bytes = kDefaultInputBufferBytes;
  RoutingConfig routing;
  CcConfig cc;
  QosConfig qos = default_qos();
  SimTime message_overhead{200};         // NIC cost before a posted message may inject
  double ack_latency_per_switch_ns = 50.0;
  SimTime advert_interval{100};          // minimum spacing of congestion snapshots per link
  SimTime series_window{0};              // 0 disables per-job delivered-bytes series
  bool log_windows = false;
  std::ostream* trace = nullptr;         // per-switch event trace (CSV) when set
};

struct MessageInfo {
  std::uint64_t id = 0;
  std::uint32_t listener = 0;
  std::uint32_t src_rank = 0;
  std::uint32_t dst_rank = 0;
  EndpointId src = 0;
  EndpointId dst = 0;
  std::uint64_t bytes = 0;
  std::size_t class_index = 0;
  std::uint64_t tag = 0;
  std::uint32_t packets = 0;
  std::uint32_t dropped = 0;
  SimTime posted{};
  SimTime sent{};
  SimTime received{};
};

class MessageListener {
 public:
  virtual ~MessageListener() = default;
  // Send completion: the message's last packet has started onto the wire.
  virtual void on_sent(const MessageInfo&) {}
  // Receive completion: every packet has reached the destination (or was dropped).
  virtual void on_received(const MessageInfo&) {}
  virtual void on_timer(std::uint64_t /*token*/) {}
};

struct PacketRecord {
  std::uint64_t id = 0;
  EndpointId src = 0;
  EndpointId dst = 0;
  std::uint32_t frame_bytes = 0;
  std::size_t class_index = 0;
  std::uint32_t switches = 0;  // switches visited
  PathClass path_class = PathClass::Minimal;
  SimTime injected{};
  SimTime delivered{};
};

struct NetworkCounters {
  std::uint64_t packets_injected = 0;
  std::uint64_t packets_delivered = 0;
  std::uint64_t packets_dropped = 0;
  std::uint64_t bytes_injected = 0;   // frame bytes
  std::uint64_t bytes_delivered = 0;  // frame bytes
  std::uint64_t payload_delivered = 0;
  std::uint64_t messages_posted = 0;
  std::uint64_t messages_received = 0;
  std::uint64_t acks = 0;
  std::uint64_t nonminimal_packets = 0;
  std::uint64_t max_path_switches = 0;
};

class Network {
 public:
  Network(const Topology& topo, NetworkConfig cfg, std::uint64_t seed);
  ~Network();
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  // `job` selects the time-series row for the listener's traffic.
  std::uint32_t add_listener(MessageListener* listener, std::uint32_t job = 0);
  std::uint64_t post(std::uint32_t listener, EndpointId src, EndpointId dst, std::uint64_t bytes, ClassId tclass,
                     std::uint64_t tag, std::uint32_t src_rank = 0, std::uint32_t dst_rank = 0);
  void set_timer(SimTime at, std::uint32_t listener, std::uint64_t token);

  // Processes events until the queue drains, stop() is called, or the next event is after `until`.
  void run(SimTime until = SimTime::max());
  void stop() { stopped_ = true; }
  [[nodiscard]] bool stopped() const { return stopped_; }
  [[nodiscard]] SimTime now() const { return events_.now(); }
  [[nodiscard]] std::uint64_t events_processed() const { return events_.processed(); }

  [[nodiscard]] const NetworkCounters& counters() const { return counters_; }
  [[nodiscard]] std::uint64_t packets_in_flight() const { return live_packets_; }
  [[nodiscard]] const CongestionControl& congestion_control() const { return cc_; }
  [[nodiscard]] const Router& router() const { return router_; }
  [[nodiscard]] const std::vector<CongestionTable>& tables() const { return tables_; }
  [[nodiscard]] const Topology& topology() const { return *topo_; }
  [[nodiscard]] const NetworkConfig& config() const { return cfg_; }
  [[nodiscard]] const BufferLayout& buffer_layout() const { return layout_; }
  [[nodiscard]] const std::vector<WindowChange>& window_log() const { return window_log_; }
  // Delivered frame bytes per job per series window.
  [[nodiscard]] const std::vector<std::vector<std::uint64_t>>& series() const { return series_; }
  // Frame bytes sent on a switch output port so far.
  [[nodiscard]] std::uint64_t port_bytes(SwitchId s, PortId p) const;

  std::function<void(const PacketRecord&)> on_delivery;

  static constexpr std::uint32_t kNumVcs = 6;  // hop index along the longest detour

 private:
  struct Packet;
  struct Message;
  struct Nic;
  struct SwitchRt;
  struct CreditMsg;

  void dispatch(const Event& ev);
  void nic_wake(EndpointId ep, SimTime at);
  void nic_try(EndpointId ep);
  void switch_arrive(SwitchId s, std::uint32_t pkt);
  void request_ready(SwitchId s, std::uint32_t pkt);
  void output_wake(SwitchId s, PortId o, SimTime at);
  void arbitrate(SwitchId s, PortId o);
  void grant(SwitchId s, PortId o, PortId in, std::size_t cls);
  void credit_return(std::uint64_t credit);
  void deliver(EndpointId ep, std::uint32_t pkt);
  void ack_arrive(EndpointId src, EndpointId dst, std::uint64_t packet_id);
  void cc_tick();
  void schedule_tick();
  void unblock_pair(EndpointId src, EndpointId dst);
  void drop(SwitchId s, std::uint32_t pkt);
  void account_packet_end(std::uint32_t pkt, bool dropped);
  void schedule_ack(const Packet& p);
  void finish_message(std::uint32_t m);
  bool head_grantable(const SwitchRt& sw, PortId o, std::uint32_t pkt) const;
  std::uint32_t out_port_of(const Packet& p, SwitchId s) const;
  void trace(SwitchId s, const char* kind, PortId in, PortId out, std::uint64_t pkt_id, SimTime t);

  std::uint32_t alloc_packet();
  void free_packet(std::uint32_t idx);

  const Topology* topo_;
  NetworkConfig cfg_;
  std::uint64_t seed_;
  std::uint32_t max_frame_;
  std::size_t num_classes_;
  SimTime lookahead_;
  EventQueue events_;
  BufferLayout layout_;
  Router router_;
  CongestionControl cc_;
  std::vector<CongestionTable> tables_;
  std::vector<SwitchRt> switches_;
  std::vector<Nic> nics_;
  std::vector<Packet> packets_;
  std::vector<std::uint32_t> free_packets_;
  std::vector<Message> messages_;
  std::vector<std::uint32_t> free_messages_;
  std::vector<CreditMsg> credits_;
  std::vector<std::uint32_t> free_credits_;
  std::vector<std::vector<std::uint64_t>> snapshots_;
  std::vector<std::uint32_t> free_snapshots_;
  std::vector<MessageListener*> listeners_;
  std::vector<std::uint32_t> listener_job_;
  std::vector<std::vector<std::uint64_t>> series_;
  std::vector<WindowChange> window_log_;
  NetworkCounters counters_;
  std::uint64_t live_packets_ = 0;
  std::uint64_t next_packet_id_ = 0;
  std::uint64_t next_message_id_ = 0;
  bool tick_pending_ = false;
  bool stopped_ = false;
};

}  // namespace dflysim
