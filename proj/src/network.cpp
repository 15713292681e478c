#include "dflysim/network.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>

#include "dflysim/traffic.hpp"

namespace dflysim {

namespace {

enum EvKind : std::uint32_t {
  kNicWake,
  kSwitchArrive,
  kRequestReady,
  kOutputWake,
  kCreditReturn,
  kDeliver,
  kAck,
  kCcTick,
  kTimer,
};

constexpr std::uint32_t kNil = kInvalidId;

SimTime ns_of(double v) { return SimTime{std::llround(v)}; }

}  // namespace

struct Network::Packet {
  std::uint64_t id = 0;
  std::uint64_t key = 0;  // (source, injection sequence): names the packet's random streams
  std::uint32_t msg = kNil;
  EndpointId src = 0;
  EndpointId dst = 0;
  std::uint32_t payload = 0;
  std::uint32_t frame = 0;
  std::uint16_t cls = 0;
  std::uint8_t hop = 0;
  bool lossless = true;
  bool routed = false;
  Path path;
  SimTime injected{};
  SimTime tail_arrival{};
  Charge charge;
  PortId in_port = 0;
  std::uint32_t next = kNil;  // VOQ chain
};

struct Network::Message {
  MessageInfo info;
  std::uint32_t next_segment = 0;
  std::uint32_t accounted = 0;
  SimTime ready_at{};
  bool sent_done = false;
  bool recv_done = false;
};

struct Network::Nic {
  struct PairQueue {
    std::deque<std::uint32_t> msgs;
    bool in_ready = false;
    bool blocked = false;
  };
  SwitchId sw = 0;
  PortId port = 0;
  SimTime prop{};
  LinkSerializer ser;
  SimTime busy_until{};
  SimTime wake_at = SimTime::max();
  CreditMirror mirror;
  std::uint64_t injected = 0;
  std::unordered_map<EndpointId, PairQueue> pairs;
  std::deque<EndpointId> ready;
};

struct Network::SwitchRt {
  struct Voq {
    std::uint32_t head = kNil;
    std::uint32_t tail = kNil;
    std::uint32_t count = 0;
    std::uint32_t requested = 0;
  };
  struct InPort {
    PeerKind peer = PeerKind::Unused;
    std::uint32_t peer_id = 0;
    PortId peer_port = 0;
    SimTime prop{};
    SimTime last_advert{-1};
    std::vector<std::uint32_t> lossy_used;
  };
  struct OutPort {
    PeerKind peer = PeerKind::Unused;
    std::uint32_t peer_id = 0;
    PortId peer_port = 0;
    SimTime prop{};
    LinkSerializer ser;
    SimTime busy_until{};
    SimTime wake_at = SimTime::max();
    LinkScheduler sched;
    CreditMirror mirror;
    std::vector<std::uint64_t> req_mask;  // per class, bit per input port
    std::vector<std::uint32_t> queued;    // per class
    std::vector<RoundRobin> rr;           // per class
    std::uint64_t bytes_sent = 0;
  };
  std::uint32_t nports = 0;
  std::vector<InPort> in;
  std::vector<OutPort> out;
  std::vector<Voq> voq;  // [(in * nports + out) * classes + cls]
  std::uint64_t latency_seed = 0;
  std::uint64_t route_seed = 0;
};

struct Network::CreditMsg {
  bool to_nic = false;
  std::uint32_t node = 0;
  PortId port = 0;
  std::uint16_t cls = 0;
  std::uint8_t vc = 0;
  Charge charge;
  std::uint32_t snapshot = kNil;
  SimTime stamp{};
};

Network::Network(const Topology& topo, NetworkConfig cfg, std::uint64_t seed)
    : topo_(&topo),
      cfg_(std::move(cfg)),
      seed_(seed),
      max_frame_(max_frame_bytes(cfg_.frame_mode)),
      num_classes_(cfg_.qos.classes.size()),
      lookahead_(cfg_.latency.grant() + cfg_.latency.max_crossbar()),
      layout_((validate(cfg_.qos), cfg_.qos), cfg_.buffer_bytes, kNumVcs, max_frame_),
      router_(topo, cfg_.routing, max_frame_),
      cc_(cfg_.cc, max_frame_, topo.params().link_bandwidth_gbps) {
  if (num_classes_ > 32) throw ConfigError("at most 32 traffic classes are supported");
  if (cfg_.log_windows) cc_.set_log(&window_log_);
  tables_.reserve(topo.num_switches());
  switches_.resize(topo.num_switches());
  for (SwitchId s = 0; s < topo.num_switches(); ++s) {
    const auto& info = topo.switch_info(s);
    auto& sw = switches_[s];
    sw.nports = static_cast<std::uint32_t>(info.ports.size());
    if (sw.nports > 64) throw ConfigError("switches with more than 64 ports are not supported");
    tables_.emplace_back(sw.nports);
    sw.in.resize(sw.nports);
    sw.out.resize(sw.nports);
    sw.voq.resize(static_cast<std::size_t>(sw.nports) * sw.nports * num_classes_);
    sw.latency_seed = derive_seed(seed, 1, s);
    sw.route_seed = derive_seed(seed, 2, s);
    for (PortId p = 0; p < sw.nports; ++p) {
      const auto& port = info.ports[p];
      const Link& link = topo.link(port.link);
      auto& in = sw.in[p];
      auto& out = sw.out[p];
      in.peer = out.peer = port.peer;
      in.peer_id = out.peer_id = port.peer_id;
      in.peer_port = out.peer_port = port.peer_port;
      in.prop = out.prop = ns_of(link.propagation_ns);
      in.lossy_used.assign(num_classes_, 0);
      out.ser = LinkSerializer(link.bandwidth_gbps, cfg_.frame_mode);
      out.sched = LinkScheduler(cfg_.qos, link.bandwidth_gbps / 8.0, max_frame_);
      if (port.peer == PeerKind::Switch) out.mirror = CreditMirror(layout_);
      out.req_mask.assign(num_classes_, 0);
      out.queued.assign(num_classes_, 0);
      out.rr.assign(num_classes_, RoundRobin{});
    }
  }
  nics_.resize(topo.num_endpoints());
  for (EndpointId e = 0; e < topo.num_endpoints(); ++e) {
    const auto& ep = topo.endpoint(e);
    const Link& link = topo.link(ep.link);
    auto& nic = nics_[e];
    nic.sw = ep.home_switch;
    nic.port = ep.port;
    nic.prop = ns_of(link.propagation_ns);
    nic.ser = LinkSerializer(link.bandwidth_gbps, cfg_.frame_mode);
    nic.mirror = CreditMirror(layout_);
  }
}

Network::~Network() = default;

std::uint32_t Network::add_listener(MessageListener* listener, std::uint32_t job) {
  listeners_.push_back(listener);
  listener_job_.push_back(job);
  if (series_.size() <= job) series_.resize(job + 1);
  return static_cast<std::uint32_t>(listeners_.size() - 1);
}

std::uint64_t Network::port_bytes(SwitchId s, PortId p) const { return switches_.at(s).out.at(p).bytes_sent; }

std::uint32_t Network::alloc_packet() {
  if (!free_packets_.empty()) {
    const std::uint32_t i = free_packets_.back();
    free_packets_.pop_back();
    return i;
  }
  packets_.emplace_back();
  return static_cast<std::uint32_t>(packets_.size() - 1);
}

void Network::free_packet(std::uint32_t idx) {
  packets_[idx].msg = kNil;
  packets_[idx].next = kNil;
  free_packets_.push_back(idx);
  --live_packets_;
}

std::uint64_t Network::post(std::uint32_t listener, EndpointId src, EndpointId dst, std::uint64_t bytes, ClassId tclass,
                            std::uint64_t tag, std::uint32_t src_rank, std::uint32_t dst_rank) {
  if (src == dst) throw SimulationError("message from endpoint " + std::to_string(src) + " to itself");
  if (src >= nics_.size() || dst >= nics_.size()) throw SimulationError("message endpoint out of range");
  std::uint32_t m;
  if (!free_messages_.empty()) {
    m = free_messages_.back();
    free_messages_.pop_back();
    messages_[m] = Message{};
  } else {
    messages_.emplace_back();
    m = static_cast<std::uint32_t>(messages_.size() - 1);
  }
  auto& msg = messages_[m];
  msg.info.id = next_message_id_++;
  msg.info.listener = listener;
  msg.info.src = src;
  msg.info.dst = dst;
  msg.info.src_rank = src_rank;
  msg.info.dst_rank = dst_rank;
  msg.info.bytes = bytes;
  msg.info.class_index = cfg_.qos.index_of(tclass);
  msg.info.tag = tag;
  msg.info.packets = segment_count(bytes);
  msg.info.posted = now();
  msg.ready_at = now() + cfg_.message_overhead;
  ++counters_.messages_posted;

  auto& nic = nics_[src];
  auto& pq = nic.pairs[dst];
  pq.msgs.push_back(m);
  if (!pq.in_ready && !pq.blocked) {
    pq.in_ready = true;
    nic.ready.push_back(dst);
  }
  nic_wake(src, std::max(now(), msg.ready_at));
  return msg.info.id;
}

void Network::set_timer(SimTime at, std::uint32_t listener, std::uint64_t token) {
  events_.schedule(std::max(at, now()), listener, kTimer, token);
}

void Network::run(SimTime until) {
  while (!stopped_ && !events_.empty()) {
    if (events_.next_time() > until) break;
    dispatch(events_.pop());
  }
}

void Network::dispatch(const Event& ev) {
  switch (ev.kind) {
    case kNicWake: {
      auto& nic = nics_[ev.target];
      if (nic.wake_at == ev.time) nic.wake_at = SimTime::max();
      nic_try(ev.target);
      break;
    }
    case kSwitchArrive: switch_arrive(ev.target, static_cast<std::uint32_t>(ev.a)); break;
    case kRequestReady: request_ready(ev.target, static_cast<std::uint32_t>(ev.a)); break;
    case kOutputWake: {
      auto& out = switches_[ev.target].out[ev.a];
      if (out.wake_at == ev.time) out.wake_at = SimTime::max();
      arbitrate(ev.target, static_cast<PortId>(ev.a));
      break;
    }
    case kCreditReturn: credit_return(ev.a); break;
    case kDeliver: deliver(ev.target, static_cast<std::uint32_t>(ev.a)); break;
    case kAck: ack_arrive(ev.target, static_cast<EndpointId>(ev.b), ev.a); break;
    case kCcTick: cc_tick(); break;
    case kTimer: listeners_.at(ev.target)->on_timer(ev.a); break;
    default: throw SimulationError("unknown event kind " + std::to_string(ev.kind));
  }
}

void Network::trace(SwitchId s, const char* kind, PortId in, PortId out, std::uint64_t pkt_id, SimTime t) {
  if (cfg_.trace) *cfg_.trace << t.ns << ',' << s << ',' << kind << ',' << in << ',' << out << ',' << pkt_id << '\n';
}

// ---- NIC -------------------------------------------------------------------------------------

void Network::nic_wake(EndpointId ep, SimTime at) {
  auto& nic = nics_[ep];
  if (nic.wake_at <= at && nic.wake_at >= now()) return;
  nic.wake_at = at;
  events_.schedule(at, ep, kNicWake);
}

void Network::nic_try(EndpointId ep) {
  auto& nic = nics_[ep];
  const SimTime t = now();
  if (nic.busy_until > t) {
    if (!nic.ready.empty()) nic_wake(ep, nic.busy_until);
    return;
  }
  SimTime earliest = SimTime::max();
  const std::size_t n = nic.ready.size();
  for (std::size_t i = 0; i < n; ++i) {
    const EndpointId dst = nic.ready.front();
    nic.ready.pop_front();
    auto& pq = nic.pairs[dst];
    Message& msg = messages_[pq.msgs.front()];
    if (msg.ready_at > t) {
      earliest = std::min(earliest, msg.ready_at);
      nic.ready.push_back(dst);
      continue;
    }
    if (!cc_.would_admit(ep, dst)) {
      pq.in_ready = false;
      pq.blocked = true;
      continue;
    }
    const auto cls = msg.info.class_index;
    const bool lossless = cfg_.qos.classes[cls].lossless;
    const std::uint32_t payload = segment_payload(msg.info.bytes, msg.next_segment);
    const std::uint32_t frame = frame_overhead(cfg_.frame_mode, payload);
    Charge charge;
    if (lossless && !nic.mirror.try_charge(cls, 0, frame, charge)) {
      nic.ready.push_back(dst);  // waits for a credit from the switch
      continue;
    }
    const std::uint32_t pi = alloc_packet();
    ++live_packets_;
    Packet& p = packets_[pi];
    p.id = next_packet_id_++;
    p.key = derive_seed(ep, 3, nic.injected++);
    p.msg = pq.msgs.front();
    p.src = ep;
    p.dst = dst;
    p.payload = payload;
    p.frame = frame;
    p.cls = static_cast<std::uint16_t>(cls);
    p.hop = 0;
    p.lossless = lossless;
    p.routed = false;
    p.injected = t;
    p.charge = charge;
    p.in_port = nic.port;
    p.next = kNil;
    cc_.on_inject(ep, dst, p.id, frame, t);
    ++counters_.packets_injected;
    counters_.bytes_injected += frame;

    const SimTime ser = nic.ser.serialize(frame);
    nic.busy_until = t + ser;
    const SimTime head = t + nic.prop;
    p.tail_arrival = head + ser;
    events_.schedule(head, nic.sw, kSwitchArrive, pi);

    ++msg.next_segment;
    const bool completed = msg.next_segment == msg.info.packets;
    if (completed) {
      pq.msgs.pop_front();
      msg.sent_done = true;
      msg.info.sent = t;
    }
    const MessageInfo info = msg.info;
    if (!pq.msgs.empty()) {
      nic.ready.push_back(dst);
    } else {
      pq.in_ready = false;
    }
    nic_wake(ep, nic.busy_until);
    // Delivery needs every packet on the wire first, so the receive side cannot have finished yet.
    if (completed) listeners_.at(info.listener)->on_sent(info);
    return;
  }
  if (earliest != SimTime::max()) nic_wake(ep, earliest);
}

void Network::unblock_pair(EndpointId src, EndpointId dst) {
  auto& nic = nics_[src];
  auto it = nic.pairs.find(dst);
  if (it == nic.pairs.end() || !it->second.blocked) return;
  if (!cc_.would_admit(src, dst)) return;
  it->second.blocked = false;
  if (!it->second.msgs.empty() && !it->second.in_ready) {
    it->second.in_ready = true;
    nic.ready.push_back(dst);
    nic_wake(src, now());
  }
}

// ---- switch ----------------------------------------------------------------------------------

std::uint32_t Network::out_port_of(const Packet& p, SwitchId s) const {
  if (p.hop < p.path.hops()) return p.path.out_ports[p.hop];
  (void)s;
  return topo_->endpoint(p.dst).port;
}

void Network::switch_arrive(SwitchId s, std::uint32_t pi) {
  Packet& p = packets_[pi];
  auto& sw = switches_[s];
  if (!p.routed) {
    const auto& tc = cfg_.qos.classes[p.cls];
    const std::uint64_t flow = (static_cast<std::uint64_t>(p.src) << 32) | p.dst;
    Rng rng(sw.route_seed ^ p.key);
    p.path = router_.route(tables_, s, topo_->switch_of(p.dst), flow, tc.ordered, tc.routing_bias_override, rng);
    p.routed = true;
    if (p.path.cls == PathClass::Nonminimal) ++counters_.nonminimal_packets;
    counters_.max_path_switches = std::max<std::uint64_t>(counters_.max_path_switches, p.path.switches.size());
    if (p.path.switches.size() > kNumVcs) throw SimulationError("path longer than the virtual channel budget");
  }
  const PortId o = out_port_of(p, s);
  if (!p.lossless) {
    auto& used = sw.in[p.in_port].lossy_used[p.cls];
    if (used + p.frame > layout_.class_reserved(p.cls)) {
      trace(s, "drop", p.in_port, o, p.id, now());
      drop(s, pi);
      return;
    }
    used += p.frame;
  }
  auto& q = sw.voq[(static_cast<std::size_t>(p.in_port) * sw.nports + o) * num_classes_ + p.cls];
  if (q.tail == kNil) {
    q.head = pi;
  } else {
    packets_[q.tail].next = pi;
  }
  q.tail = pi;
  p.next = kNil;
  ++q.count;
  ++sw.out[o].queued[p.cls];
  tables_[s].add_local(o, p.frame);
  trace(s, "arrive", p.in_port, o, p.id, now());
  events_.schedule(now() + cfg_.latency.request(), s, kRequestReady, pi);
}

void Network::request_ready(SwitchId s, std::uint32_t pi) {
  const Packet& p = packets_[pi];
  auto& sw = switches_[s];
  const PortId o = out_port_of(p, s);
  auto& q = sw.voq[(static_cast<std::size_t>(p.in_port) * sw.nports + o) * num_classes_ + p.cls];
  ++q.requested;
  sw.out[o].req_mask[p.cls] |= (std::uint64_t{1} << p.in_port);
  trace(s, "request", p.in_port, o, p.id, now());
  output_wake(s, o, now());
}

void Network::output_wake(SwitchId s, PortId o, SimTime at) {
  auto& out = switches_[s].out[o];
  at = std::max(at, now());
  if (out.wake_at <= at && out.wake_at >= now()) return;
  out.wake_at = at;
  events_.schedule(at, s, kOutputWake, o);
}

bool Network::head_grantable(const SwitchRt& sw, PortId o, std::uint32_t pi) const {
  const auto& out = sw.out[o];
  if (out.peer != PeerKind::Switch) return true;
  const Packet& p = packets_[pi];
  if (!p.lossless) return true;
  return out.mirror.can_charge(p.cls, p.hop + 1U, p.frame);
}

void Network::arbitrate(SwitchId s, PortId o) {
  auto& sw = switches_[s];
  auto& out = sw.out[o];
  const SimTime t = now();
  for (;;) {
    if (out.busy_until - t > lookahead_) {
      output_wake(s, o, out.busy_until - lookahead_);
      return;
    }
    std::uint32_t eligible = 0;
    std::uint32_t backlogged = 0;
    for (std::size_t c = 0; c < num_classes_; ++c) {
      if (out.queued[c] > 0) backlogged |= 1U << c;
      std::uint64_t mask = out.req_mask[c];
      while (mask) {
        const auto in = static_cast<PortId>(std::countr_zero(mask));
        mask &= mask - 1;
        const auto& q = sw.voq[(static_cast<std::size_t>(in) * sw.nports + o) * num_classes_ + c];
        if (head_grantable(sw, o, q.head)) {
          eligible |= 1U << c;
          break;
        }
      }
    }
    if (eligible == 0) return;
    const auto decision = out.sched.pick(eligible, backlogged, t);
    if (!decision.class_index) {
      if (decision.retry_at != SimTime::max()) output_wake(s, o, decision.retry_at);
      return;
    }
    const std::size_t c = *decision.class_index;
    std::uint64_t ready = 0;
    std::uint64_t mask = out.req_mask[c];
    while (mask) {
      const auto in = static_cast<PortId>(std::countr_zero(mask));
      mask &= mask - 1;
      const auto& q = sw.voq[(static_cast<std::size_t>(in) * sw.nports + o) * num_classes_ + c];
      if (head_grantable(sw, o, q.head)) ready |= std::uint64_t{1} << in;
    }
    grant(s, o, out.rr[c].pick(ready), c);
  }
}

void Network::grant(SwitchId s, PortId o, PortId in, std::size_t c) {
  auto& sw = switches_[s];
  auto& out = sw.out[o];
  const SimTime t = now();
  auto& q = sw.voq[(static_cast<std::size_t>(in) * sw.nports + o) * num_classes_ + c];
  const std::uint32_t pi = q.head;
  Packet& p = packets_[pi];
  q.head = p.next;
  if (q.head == kNil) q.tail = kNil;
  p.next = kNil;
  --q.count;
  if (--q.requested == 0) out.req_mask[c] &= ~(std::uint64_t{1} << in);
  --out.queued[c];
  tables_[s].add_local(o, -static_cast<std::int64_t>(p.frame));

  Rng rng(sw.latency_seed ^ p.key);
  const SimTime traversal = traversal_latency(cfg_.latency, rng);
  const SimTime grant_at = t + cfg_.latency.grant();
  const SimTime ser = out.ser.serialize(p.frame);
  SimTime depart = grant_at + cfg_.latency.crossbar(traversal);
  depart = std::max(depart, out.busy_until);
  depart = std::max(depart, p.tail_arrival - ser);
  out.busy_until = depart + ser;
  out.bytes_sent += p.frame;
  out.sched.on_sent(c, p.frame);
  trace(s, "grant", in, o, p.id, grant_at);
  trace(s, "depart", in, o, p.id, depart);

  // Return the input-buffer space to whoever fed this input once the tail has left.
  auto& inp = sw.in[in];
  if (p.lossless) {
    std::uint32_t ci;
    if (!free_credits_.empty()) {
      ci = free_credits_.back();
      free_credits_.pop_back();
    } else {
      credits_.emplace_back();
      ci = static_cast<std::uint32_t>(credits_.size() - 1);
    }
    CreditMsg& cm = credits_[ci];
    cm = CreditMsg{};
    cm.to_nic = inp.peer == PeerKind::Nic;
    cm.node = inp.peer_id;
    cm.port = inp.peer_port;
    cm.cls = p.cls;
    cm.vc = p.hop;
    cm.charge = p.charge;
    if (!cm.to_nic && (inp.last_advert.ns < 0 || t - inp.last_advert >= cfg_.advert_interval)) {
      inp.last_advert = t;
      std::uint32_t si;
      if (!free_snapshots_.empty()) {
        si = free_snapshots_.back();
        free_snapshots_.pop_back();
      } else {
        snapshots_.emplace_back();
        si = static_cast<std::uint32_t>(snapshots_.size() - 1);
      }
      snapshots_[si] = tables_[s].local_depths();
      cm.snapshot = si;
      cm.stamp = t;
    }
    events_.schedule(depart + ser + inp.prop, cm.node, kCreditReturn, ci);
  } else {
    inp.lossy_used[p.cls] -= p.frame;
  }

  if (out.peer == PeerKind::Nic) {
    events_.schedule(depart + out.prop + ser, out.peer_id, kDeliver, pi);
    return;
  }
  if (p.lossless) {
    Charge next;
    const bool ok = out.mirror.try_charge(c, p.hop + 1U, p.frame, next);
    if (!ok) throw SimulationError("granted a packet without downstream credit");
    p.charge = next;
  }
  ++p.hop;
  p.in_port = out.peer_port;
  const SimTime head = depart + out.prop;
  p.tail_arrival = head + ser;
  events_.schedule(head, out.peer_id, kSwitchArrive, pi);
}

void Network::credit_return(std::uint64_t ci) {
  const CreditMsg cm = credits_[ci];
  free_credits_.push_back(static_cast<std::uint32_t>(ci));
  if (cm.to_nic) {
    nics_[cm.node].mirror.refund(cm.cls, cm.vc, cm.charge);
    nic_wake(cm.node, now());
    return;
  }
  auto& out = switches_[cm.node].out[cm.port];
  out.mirror.refund(cm.cls, cm.vc, cm.charge);
  if (cm.snapshot != kNil) {
    tables_[cm.node].on_ack_info(cm.port, snapshots_[cm.snapshot], cm.stamp);
    free_snapshots_.push_back(cm.snapshot);
  }
  output_wake(cm.node, cm.port, now());
}

// ---- endpoints -------------------------------------------------------------------------------

void Network::schedule_ack(const Packet& p) {
  // Acks ride a control channel: a fixed per-switch cost plus wire propagation back to the source.
  double ns = cfg_.ack_latency_per_switch_ns * static_cast<double>(p.path.switches.size());
  ns += topo_->link(topo_->endpoint(p.src).link).propagation_ns + topo_->link(topo_->endpoint(p.dst).link).propagation_ns;
  for (std::size_t h = 0; h < p.path.hops(); ++h) {
    const auto& port = topo_->switch_info(p.path.switches[h]).ports[p.path.out_ports[h]];
    ns += topo_->link(port.link).propagation_ns;
  }
  ++counters_.acks;
  events_.schedule(now() + ns_of(ns), p.src, kAck, p.id, p.dst);
}

void Network::drop(SwitchId s, std::uint32_t pi) {
  (void)s;
  ++counters_.packets_dropped;
  schedule_ack(packets_[pi]);
  account_packet_end(pi, true);
}

void Network::deliver(EndpointId ep, std::uint32_t pi) {
  Packet& p = packets_[pi];
  (void)ep;
  ++counters_.packets_delivered;
  counters_.bytes_delivered += p.frame;
  counters_.payload_delivered += p.payload;
  const Message& msg = messages_[p.msg];
  if (cfg_.series_window.ns > 0) {
    const std::uint32_t job = listener_job_[msg.info.listener];
    const auto bin = static_cast<std::size_t>(now().ns / cfg_.series_window.ns);
    auto& row = series_[job];
    if (row.size() <= bin) row.resize(bin + 1, 0);
    row[bin] += p.frame;
  }
  if (on_delivery) {
    on_delivery(PacketRecord{p.id, p.src, p.dst, p.frame, p.cls, static_cast<std::uint32_t>(p.path.switches.size()),
                             p.path.cls, p.injected, now()});
  }
  schedule_ack(p);
  account_packet_end(pi, false);
}

void Network::account_packet_end(std::uint32_t pi, bool dropped) {
  const std::uint32_t m = packets_[pi].msg;
  free_packet(pi);
  Message& msg = messages_[m];
  ++msg.accounted;
  if (dropped) ++msg.info.dropped;
  if (msg.accounted < msg.info.packets) return;
  msg.recv_done = true;
  msg.info.received = now();
  ++counters_.messages_received;
  const MessageInfo info = msg.info;
  if (msg.sent_done) finish_message(m);
  listeners_.at(info.listener)->on_received(info);
}

void Network::finish_message(std::uint32_t m) { free_messages_.push_back(m); }

void Network::ack_arrive(EndpointId src, EndpointId dst, std::uint64_t packet_id) {
  cc_.on_ack(packet_id, now());
  // A pair with nothing in flight between two messages gives up its tracking state.
  const auto& nic = nics_[src];
  if (auto it = nic.pairs.find(dst);
      it == nic.pairs.end() || it->second.msgs.empty() || messages_[it->second.msgs.front()].next_segment == 0) {
    (void)cc_.release(src, dst);
  }
  unblock_pair(src, dst);
  if (cc_.needs_tick()) schedule_tick();
}

void Network::schedule_tick() {
  if (tick_pending_) return;
  tick_pending_ = true;
  const std::int64_t period = cfg_.cc.tick.ns;
  events_.schedule(SimTime{(now().ns / period + 1) * period}, 0, kCcTick);
}

void Network::cc_tick() {
  tick_pending_ = false;
  for (const auto& k : cc_.tick(now())) unblock_pair(k.src, k.dst);
  if (cc_.needs_tick()) schedule_tick();
}

}  // namespace dflysim
