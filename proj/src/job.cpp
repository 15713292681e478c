#include "dflysim/job.hpp"

namespace dflysim {

namespace {
constexpr std::uint64_t kRoundStride = std::uint64_t{1} << 24;
}

Job::Job(Network& net, JobId job, WorkloadSpec spec, std::vector<EndpointId> nodes)
    : net_(&net), job_(job), spec_(std::move(spec)), nodes_(std::move(nodes)) {
  validate(spec_, static_cast<std::uint32_t>(nodes_.size()));
  if (nodes_.size() >= kRoundStride) throw ConfigError("too many ranks in one job");
  listener_ = net_->add_listener(this, job_);
  ranks_.resize(nodes_.size());
}

std::uint64_t Job::tag(std::uint64_t iteration, std::uint32_t round) const { return iteration * kRoundStride + round; }

bool Job::may_post() const {
  if (halted_) return false;
  return !spec_.stop_ns || net_->now().ns < *spec_.stop_ns;
}

void Job::timer(std::uint32_t r, SimTime at, TimerKind kind) {
  net_->set_timer(at, listener_, (static_cast<std::uint64_t>(r) << 2) | kind);
}

void Job::start() {
  const auto P = static_cast<std::uint32_t>(nodes_.size());
  active_ranks_ = 0;
  for (std::uint32_t r = 0; r < P; ++r) {
    if (!build_program(spec_, P, r, 0).empty() || spec_.rotate_target) ++active_ranks_;
  }
  const SimTime at{std::max<std::int64_t>(spec_.start_ns, net_->now().ns)};
  for (std::uint32_t r = 0; r < P; ++r) timer(r, at, kStart);
}

void Job::begin_iteration(std::uint32_t r) {
  auto& rank = ranks_[r];
  if (!may_post() || (spec_.iterations != 0 && rank.iteration >= spec_.iterations)) {
    rank.done = true;
    return;
  }
  if (rank.iteration == 0 || spec_.rotate_target) {
    rank.program = build_program(spec_, static_cast<std::uint32_t>(nodes_.size()), r, rank.iteration);
  }
  if (rank.program.empty() && !spec_.rotate_target) {
    rank.done = true;  // passive receiver
    return;
  }
  rank.iteration_start = net_->now();
  rank.step = 0;
  if (spec_.compute_ns > 0) {
    timer(r, net_->now() + SimTime{spec_.compute_ns}, kComputeDone);
    return;
  }
  begin_steps(r);
}

void Job::begin_steps(std::uint32_t r) {
  auto& rank = ranks_[r];
  if (rank.program.empty()) {
    // This iteration's incast target: nothing to send, so it finishes at once.
    rank.step = 0;
    finish_iteration(r);
    return;
  }
  run_step(r);
}

void Job::run_step(std::uint32_t r) {
  auto& rank = ranks_[r];
  if (!may_post()) {
    rank.done = true;
    return;
  }
  const Step& st = rank.program[rank.step];
  rank.repeats_left = st.repeat > 0 ? st.repeat - 1 : 0;
  rank.sends_pending = st.sends.size() * std::max<std::uint64_t>(st.repeat, 1);
  const std::uint64_t t = tag(rank.iteration, st.round);
  std::uint64_t early = 0;
  if (auto it = rank.early.find(t); it != rank.early.end()) {
    early = it->second;
    rank.early.erase(it);
  }
  rank.recvs_needed = st.recvs.size() > early ? st.recvs.size() - early : 0;
  if (st.sends.empty()) {
    check_step(r);
    return;
  }
  for (const auto& [peer, bytes] : st.sends) post(r, peer, bytes);
}

void Job::post(std::uint32_t r, std::uint32_t peer, std::uint64_t bytes) {
  const auto& rank = ranks_[r];
  const Step& st = rank.program[rank.step];
  ++messages_sent_;
  net_->post(listener_, nodes_[r], nodes_[peer], bytes, spec_.tclass, tag(rank.iteration, st.round), r, peer);
}

void Job::on_sent(const MessageInfo& m) {
  const auto& rank = ranks_[m.src_rank];
  if (rank.done || rank.program[rank.step].synchronous) return;
  send_complete(m.src_rank);
}

void Job::send_complete(std::uint32_t r) {
  auto& rank = ranks_[r];
  if (rank.sends_pending > 0) --rank.sends_pending;
  if (rank.repeats_left > 0) {
    if (!may_post()) {
      rank.done = true;
      return;
    }
    --rank.repeats_left;
    const auto& st = rank.program[rank.step];
    for (const auto& [peer, bytes] : st.sends) post(r, peer, bytes);
    return;
  }
  check_step(r);
}

void Job::on_received(const MessageInfo& m) {
  ++messages_received_;
  bytes_received_ += m.bytes;
  if (const auto& sender = ranks_[m.src_rank]; !sender.done && !sender.program.empty()) {
    const Step& st = sender.program[sender.step];
    if (st.synchronous && m.tag == tag(sender.iteration, st.round)) send_complete(m.src_rank);
  }
  auto& rank = ranks_[m.dst_rank];
  if (rank.done || rank.program.empty()) return;
  const std::uint64_t current = tag(rank.iteration, rank.program[rank.step].round);
  if (m.tag != current) {
    ++rank.early[m.tag];
    return;
  }
  if (rank.recvs_needed > 0) --rank.recvs_needed;
  check_step(m.dst_rank);
}

void Job::check_step(std::uint32_t r) {
  auto& rank = ranks_[r];
  if (rank.sends_pending > 0 || rank.recvs_needed > 0 || rank.repeats_left > 0) return;
  const std::int64_t delay = rank.program[rank.step].delay_after_ns;
  if (delay > 0) {
    timer(r, net_->now() + SimTime{delay}, kStepDelay);
    return;
  }
  advance(r);
}

void Job::advance(std::uint32_t r) {
  auto& rank = ranks_[r];
  ++rank.step;
  if (rank.step < rank.program.size()) {
    run_step(r);
    return;
  }
  finish_iteration(r);
}

void Job::finish_iteration(std::uint32_t r) {
  auto& rank = ranks_[r];
  const std::uint64_t it = rank.iteration;
  const SimTime took = net_->now() - rank.iteration_start;
  auto& p = pending_[it];
  ++p.ranks;
  p.slowest = std::max(p.slowest, took);
  ++rank.iteration;
  if (p.ranks == active_ranks_) {
    const SimTime slowest = p.slowest;
    pending_.erase(it);
    ++iterations_done_;
    if (on_iteration && on_iteration(it, slowest)) halted_ = true;
  }
  begin_iteration(r);
}

void Job::on_timer(std::uint64_t token) {
  const auto r = static_cast<std::uint32_t>(token >> 2);
  switch (token & 3U) {
    case kStart: begin_iteration(r); break;
    case kComputeDone: begin_steps(r); break;
    default: advance(r); break;
  }
}

}  // namespace dflysim
