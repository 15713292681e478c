#pragma once

#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dflysim/network.hpp"
#include "dflysim/topology.hpp"
#include "dflysim/traffic.hpp"

namespace dflysim {

struct HarnessConfig {
  enum class Mode { Impact, Series };
  Mode mode = Mode::Impact;
  std::uint32_t min_iterations = 200;
  double min_victim_seconds = 4.0;  // before scaling
  double time_scale = 0.01;
  double ci_target = 0.05;          // CI half-width relative to the median
  std::uint32_t max_iterations = 20000;
  std::uint32_t bootstrap_resamples = 1000;
  std::int64_t warmup_ns = 20'000;  // aggressor head start
  std::int64_t duration_ns = 0;     // series mode run length
  std::int64_t series_window_ns = 10'000;
};

struct OutputOptions {
  bool switch_trace = false;
  bool window_log = false;
};

struct ScenarioConfig {
  std::uint64_t seed = 1;
  DragonflyParams topology;
  NetworkConfig network;
  AllocationStrategy allocation = AllocationStrategy::Interleaved;
  NodeSplit split;
  WorkloadSpec victim;
  std::optional<WorkloadSpec> aggressor;
  HarnessConfig harness;
  OutputOptions outputs;
};

// Throws ConfigError on inconsistent scenarios. Runs no simulation code.
void validate(const ScenarioConfig& cfg);

struct RunStats {
  std::vector<double> samples;  // per-iteration victim time, ns (slowest rank)
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double ci95_halfwidth_rel = 0.0;
  double victim_time_ns = 0.0;
  bool unstable = false;
};

// Nearest-rank percentile of an ascending sample: the ceil(p/100 * n)-th smallest value.
double percentile_nearest_rank(const std::vector<double>& sorted, double p);

// Half-width of the bootstrap 95% interval of the median, divided by the sample median.
double bootstrap_ci_halfwidth_rel(const std::vector<double>& samples, std::uint32_t resamples, std::uint64_t seed);

RunStats summarize(std::vector<double> samples, std::uint32_t resamples, std::uint64_t seed);

class StoppingRule {
 public:
  enum class Verdict { Continue, Stable, Capped };
  StoppingRule(const HarnessConfig& cfg, std::uint64_t seed);

  // Feed every new sample; the bootstrap only runs once the iteration and time floors hold.
  Verdict add(double sample_ns);
  [[nodiscard]] const std::vector<double>& samples() const { return samples_; }
  [[nodiscard]] double victim_time_ns() const { return total_ns_; }
  [[nodiscard]] double time_floor_ns() const;
  [[nodiscard]] double last_ci() const { return last_ci_; }

 private:
  HarnessConfig cfg_;
  std::uint64_t seed_;
  std::vector<double> samples_;
  double total_ns_ = 0.0;
  double last_ci_ = -1.0;
  std::size_t next_check_ = 0;
};

// Generic driver used by tests and by the simulator runs: draws samples until the rule stops.
RunStats run_until_stable(const std::function<double()>& sampler, const HarnessConfig& cfg, std::uint64_t seed);

double congestion_impact(double t_isolated, double t_contended);

struct RunResult {
  RunStats stats;
  NetworkCounters counters;
  std::uint64_t packets_in_flight = 0;
  std::uint64_t events = 0;
  SimTime end{};
  std::uint64_t duplicate_acks = 0;
  std::vector<std::vector<std::uint64_t>> series;  // [job][window] delivered frame bytes
  std::vector<WindowChange> window_log;
};

// One victim run, optionally with the aggressor. Writes a switch trace to `trace` when given.
RunResult run_victim(const ScenarioConfig& cfg, bool with_aggressor, std::ostream* trace = nullptr);

// Fixed-duration run of both jobs recording delivered bytes per job per window.
RunResult run_series(const ScenarioConfig& cfg, std::ostream* trace = nullptr);

struct CongestionReport {
  double t_isolated = 0.0;
  double t_contended = 0.0;
  double impact = 0.0;
  RunStats isolated;
  RunStats contended;
  bool unstable = false;
};

// Isolated baselines keyed by everything except the aggressor. Concurrent requests for one key
// compute it once.
class BaselineCache {
 public:
  RunResult get(const std::string& key, const std::function<RunResult()>& compute);
  [[nodiscard]] std::uint64_t hits() const;
  [[nodiscard]] std::uint64_t misses() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_future<RunResult>> entries_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
};

std::string baseline_key(const ScenarioConfig& cfg);

// `trace` receives the contended run's switch trace; `contended_run` its full result.
CongestionReport run_congestion(const ScenarioConfig& cfg, BaselineCache* cache = nullptr, std::ostream* trace = nullptr,
                                RunResult* contended_run = nullptr);

}  // namespace dflysim
