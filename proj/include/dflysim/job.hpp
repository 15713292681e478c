#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <unordered_map>
#include <vector>

#include "dflysim/network.hpp"
#include "dflysim/traffic.hpp"

namespace dflysim {

// Drives one job's ranks through their per-iteration programs on a Network. A rank moves to the
// next step once its sends have gone out and the expected messages have arrived; iterations run
// back to back with no barrier between ranks.
class Job : public MessageListener {
 public:
  Job(Network& net, JobId job, WorkloadSpec spec, std::vector<EndpointId> nodes);

  void start();
  // No new messages after this point; in-flight traffic still drains.
  void halt() { halted_ = true; }
  [[nodiscard]] bool halted() const { return halted_; }

  // Called when every active rank has finished `iteration`; `duration` is the slowest rank's time
  // for it. Returning true halts the job.
  std::function<bool(std::uint64_t iteration, SimTime duration)> on_iteration;

  [[nodiscard]] std::uint64_t iterations_done() const { return iterations_done_; }
  [[nodiscard]] std::uint64_t messages_sent() const { return messages_sent_; }
  [[nodiscard]] std::uint64_t messages_received() const { return messages_received_; }
  [[nodiscard]] std::uint64_t bytes_received() const { return bytes_received_; }
  [[nodiscard]] std::uint32_t active_ranks() const { return active_ranks_; }
  [[nodiscard]] std::uint32_t listener_id() const { return listener_; }
  [[nodiscard]] const WorkloadSpec& spec() const { return spec_; }

  void on_sent(const MessageInfo& m) override;
  void on_received(const MessageInfo& m) override;
  void on_timer(std::uint64_t token) override;

 private:
  struct Rank {
    std::uint64_t iteration = 0;
    std::size_t step = 0;
    std::vector<Step> program;
    std::uint64_t sends_pending = 0;
    std::uint64_t repeats_left = 0;
    std::uint64_t recvs_needed = 0;
    SimTime iteration_start{};
    bool done = false;
    std::unordered_map<std::uint64_t, std::uint32_t> early;  // tag -> messages that came ahead
  };
  struct Pending {
    std::uint32_t ranks = 0;
    SimTime slowest{};
  };
  enum TimerKind : std::uint64_t { kStart = 0, kComputeDone = 1, kStepDelay = 2 };

  [[nodiscard]] std::uint64_t tag(std::uint64_t iteration, std::uint32_t round) const;
  void begin_iteration(std::uint32_t r);
  void begin_steps(std::uint32_t r);
  void timer(std::uint32_t r, SimTime at, TimerKind kind);
  void run_step(std::uint32_t r);
  void check_step(std::uint32_t r);
  void advance(std::uint32_t r);
  void finish_iteration(std::uint32_t r);
  void post(std::uint32_t r, std::uint32_t peer, std::uint64_t bytes);
  void send_complete(std::uint32_t r);
  [[nodiscard]] bool may_post() const;

  Network* net_;
  JobId job_;
  WorkloadSpec spec_;
  std::vector<EndpointId> nodes_;
  std::vector<Rank> ranks_;
  std::uint32_t listener_ = 0;
  std::uint32_t active_ranks_ = 0;
  std::map<std::uint64_t, Pending> pending_;
  std::uint64_t iterations_done_ = 0;
  std::uint64_t messages_sent_ = 0;
  std::uint64_t messages_received_ = 0;
  std::uint64_t bytes_received_ = 0;
  bool halted_ = false;
};

}  // namespace dflysim
