#include "dflysim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dflysim/config.hpp"
#include "dflysim/job.hpp"

namespace dflysim {

void validate(const ScenarioConfig& cfg) {
  try {
    validate(cfg.topology);
  } catch (const TopologyError& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  }
  try {
    validate(cfg.network.qos);
  } catch (const QosError& e) {
    throw ConfigError(std::string("qos: ") + e.what());
  }
  const std::uint64_t endpoints = static_cast<std::uint64_t>(cfg.topology.num_groups) *
                                  cfg.topology.switches_per_group * cfg.topology.endpoints_per_switch;
  if (static_cast<std::uint64_t>(cfg.split.victim) + cfg.split.aggressor > endpoints) {
    throw ConfigError("split needs " + std::to_string(cfg.split.victim + cfg.split.aggressor) + " nodes but the topology has " +
                      std::to_string(endpoints));
  }
  if (cfg.split.victim == 0) throw ConfigError("traffic.split.victim must be >= 1");
  if (cfg.victim.ppn != 1 && cfg.harness.mode == HarnessConfig::Mode::Impact) {
    throw ConfigError("traffic.victim.ppn > 1 is only supported in series mode");
  }
  validate(cfg.victim, cfg.split.victim);
  (void)cfg.network.qos.index_of(cfg.victim.tclass);
  if (cfg.aggressor) {
    if (cfg.split.aggressor == 0) throw ConfigError("an aggressor needs traffic.split.aggressor >= 1");
    validate(*cfg.aggressor, cfg.split.aggressor);
    (void)cfg.network.qos.index_of(cfg.aggressor->tclass);
  }
  const auto& h = cfg.harness;
  if (h.ci_target <= 0.0) throw ConfigError("harness.ci_target must be > 0");
  if (h.time_scale < 0.0) throw ConfigError("harness.time_scale must be >= 0");
  if (h.max_iterations < h.min_iterations) throw ConfigError("harness.max_iterations must be >= min_iterations");
  if (h.bootstrap_resamples == 0) throw ConfigError("harness.bootstrap_resamples must be >= 1");
  if (h.mode == HarnessConfig::Mode::Series && h.duration_ns <= 0) throw ConfigError("series mode needs harness.duration_ns > 0");
  if (h.series_window_ns <= 0) throw ConfigError("harness.series_window_ns must be > 0");
  if (cfg.network.buffer_bytes < 2 * max_frame_bytes(cfg.network.frame_mode)) throw ConfigError("switch.buffer_bytes is too small");
  if (cfg.network.latency.max_ns < cfg.network.latency.min_ns || cfg.network.latency.min_ns < 0) {
    throw ConfigError("switch traversal latency range is invalid");
  }
}

double percentile_nearest_rank(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

namespace {
double median_of(std::vector<double>& v) {
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}
}  // namespace

double bootstrap_ci_halfwidth_rel(const std::vector<double>& samples, std::uint32_t resamples, std::uint64_t seed) {
  if (samples.size() < 2) return 0.0;
  std::vector<double> tmp = samples;
  const double med = median_of(tmp);
  if (med == 0.0) return 0.0;
  Rng rng(derive_seed(seed, 0xb007, samples.size()));
  std::vector<double> medians;
  medians.reserve(resamples);
  std::vector<double> draw(samples.size());
  for (std::uint32_t r = 0; r < resamples; ++r) {
    for (auto& d : draw) d = samples[uniform_below(rng, samples.size())];
    medians.push_back(median_of(draw));
  }
  std::sort(medians.begin(), medians.end());
  const double lo = percentile_nearest_rank(medians, 2.5);
  const double hi = percentile_nearest_rank(medians, 97.5);
  return (hi - lo) / 2.0 / std::abs(med);
}

RunStats summarize(std::vector<double> samples, std::uint32_t resamples, std::uint64_t seed) {
  RunStats s;
  s.samples = std::move(samples);
  if (s.samples.empty()) return s;
  std::vector<double> sorted = s.samples;
  std::sort(sorted.begin(), sorted.end());
  s.victim_time_ns = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  s.mean = s.victim_time_ns / static_cast<double>(sorted.size());
  s.median = percentile_nearest_rank(sorted, 50.0);
  s.p95 = percentile_nearest_rank(sorted, 95.0);
  s.p99 = percentile_nearest_rank(sorted, 99.0);
  s.ci95_halfwidth_rel = bootstrap_ci_halfwidth_rel(s.samples, resamples, seed);
  return s;
}

StoppingRule::StoppingRule(const HarnessConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {}

double StoppingRule::time_floor_ns() const { return cfg_.min_victim_seconds * cfg_.time_scale * 1e9; }

StoppingRule::Verdict StoppingRule::add(double sample_ns) {
  samples_.push_back(sample_ns);
  total_ns_ += sample_ns;
  const std::size_t n = samples_.size();
  if (n >= cfg_.max_iterations) return Verdict::Capped;
  if (n < cfg_.min_iterations || total_ns_ < time_floor_ns()) return Verdict::Continue;
  // The bootstrap is costly; once the floors hold, re-check after every ~5% growth.
  if (n < next_check_) return Verdict::Continue;
  next_check_ = n + std::max<std::size_t>(1, n / 20);
  last_ci_ = bootstrap_ci_halfwidth_rel(samples_, cfg_.bootstrap_resamples, seed_);
  return last_ci_ <= cfg_.ci_target ? Verdict::Stable : Verdict::Continue;
}

RunStats run_until_stable(const std::function<double()>& sampler, const HarnessConfig& cfg, std::uint64_t seed) {
  StoppingRule rule(cfg, seed);
  StoppingRule::Verdict v = StoppingRule::Verdict::Continue;
  while (v == StoppingRule::Verdict::Continue) v = rule.add(sampler());
  RunStats s = summarize(rule.samples(), cfg.bootstrap_resamples, seed);
  s.unstable = v == StoppingRule::Verdict::Capped && s.ci95_halfwidth_rel > cfg.ci_target;
  if (s.unstable) std::cerr << "warning: run stopped at the iteration cap without a stable median\n";
  return s;
}

double congestion_impact(double t_isolated, double t_contended) {
  if (!(t_isolated > 0.0)) throw std::invalid_argument("isolated time must be positive");
  return t_contended / t_isolated;
}

namespace {

NetworkConfig network_for(const ScenarioConfig& cfg, std::ostream* trace) {
  NetworkConfig n = cfg.network;
  n.trace = trace;
  n.log_windows = cfg.outputs.window_log;
  return n;
}

void add_aggressor(Network& net, const ScenarioConfig& cfg, const Allocation& alloc,
                   std::vector<std::unique_ptr<Job>>& jobs) {
  if (!cfg.aggressor) return;
  for (std::uint32_t k = 0; k < cfg.aggressor->ppn; ++k) {
    jobs.push_back(std::make_unique<Job>(net, 1, *cfg.aggressor, alloc.aggressor));
  }
}

RunResult collect(const Network& net, RunResult r) {
  r.counters = net.counters();
  r.packets_in_flight = net.packets_in_flight();
  r.events = net.events_processed();
  r.end = net.now();
  r.duplicate_acks = net.congestion_control().duplicate_acks();
  r.series = net.series();
  r.window_log = net.window_log();
  return r;
}

}  // namespace

RunResult run_victim(const ScenarioConfig& cfg, bool with_aggressor, std::ostream* trace) {
  validate(cfg);
  const Topology topo = build_dragonfly(cfg.topology);
  const Allocation alloc = allocate_nodes(cfg.allocation, cfg.split, topo.num_endpoints(), cfg.seed);
  Network net(topo, network_for(cfg, trace), cfg.seed);

  std::vector<std::unique_ptr<Job>> jobs;
  WorkloadSpec vspec = cfg.victim;
  const bool contended = with_aggressor && cfg.aggressor.has_value();
  vspec.start_ns = std::max<std::int64_t>(vspec.start_ns, cfg.harness.warmup_ns);
  auto victim = std::make_unique<Job>(net, 0, vspec, alloc.victim);
  StoppingRule rule(cfg.harness, cfg.seed);
  StoppingRule::Verdict verdict = StoppingRule::Verdict::Continue;
  const bool bounded = vspec.iterations != 0;
  victim->on_iteration = [&](std::uint64_t, SimTime d) {
    verdict = rule.add(static_cast<double>(d.ns));
    const bool last = bounded ? rule.samples().size() >= vspec.iterations : verdict != StoppingRule::Verdict::Continue;
    if (last) net.stop();
    return last;
  };
  if (contended) add_aggressor(net, cfg, alloc, jobs);
  victim->start();
  for (auto& j : jobs) j->start();
  net.run();
  if (!net.stopped()) {
    throw SimulationError("victim stalled after " + std::to_string(rule.samples().size()) + " iterations at t=" +
                          std::to_string(net.now().ns) + "ns");
  }
  RunResult r;
  r.stats = summarize(rule.samples(), cfg.harness.bootstrap_resamples, cfg.seed);
  r.stats.unstable = !bounded && verdict == StoppingRule::Verdict::Capped && r.stats.ci95_halfwidth_rel > cfg.harness.ci_target;
  if (r.stats.unstable) std::cerr << "warning: victim hit harness.max_iterations without a stable median\n";
  return collect(net, std::move(r));
}

RunResult run_series(const ScenarioConfig& cfg, std::ostream* trace) {
  validate(cfg);
  const Topology topo = build_dragonfly(cfg.topology);
  const Allocation alloc = allocate_nodes(cfg.allocation, cfg.split, topo.num_endpoints(), cfg.seed);
  NetworkConfig ncfg = network_for(cfg, trace);
  ncfg.series_window = SimTime{cfg.harness.series_window_ns};
  Network net(topo, ncfg, cfg.seed);
  std::vector<std::unique_ptr<Job>> jobs;
  for (std::uint32_t k = 0; k < cfg.victim.ppn; ++k) {
    jobs.push_back(std::make_unique<Job>(net, 0, cfg.victim, alloc.victim));
  }
  add_aggressor(net, cfg, alloc, jobs);
  for (auto& j : jobs) j->start();
  net.run(SimTime{cfg.harness.duration_ns});
  RunResult r;
  r = collect(net, std::move(r));
  const std::size_t windows = static_cast<std::size_t>(cfg.harness.duration_ns / cfg.harness.series_window_ns);
  for (auto& row : r.series) row.resize(std::max(row.size(), windows), 0);
  return r;
}

RunResult BaselineCache::get(const std::string& key, const std::function<RunResult()>& compute) {
  std::shared_future<RunResult> fut;
  std::promise<RunResult> promise;
  bool owner = false;
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it != entries_.end()) {
      ++hits_;
      fut = it->second;
    } else {
      ++misses_;
      owner = true;
      fut = promise.get_future().share();
      entries_.emplace(key, fut);
    }
  }
  if (owner) {
    try {
      promise.set_value(compute());
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
  }
  return fut.get();
}

std::uint64_t BaselineCache::hits() const {
  std::lock_guard<std::mutex> lock(mu_);
  return hits_;
}

std::uint64_t BaselineCache::misses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return misses_;
}

std::string baseline_key(const ScenarioConfig& cfg) {
  ScenarioConfig c = cfg;
  c.aggressor.reset();
  c.outputs = OutputOptions{};
  return canonical_text(c);
}

CongestionReport run_congestion(const ScenarioConfig& cfg, BaselineCache* cache, std::ostream* trace,
                                RunResult* contended_run) {
  validate(cfg);
  CongestionReport rep;
  auto isolated = [&] { return run_victim(cfg, false); };
  const RunResult base = cache ? cache->get(baseline_key(cfg), isolated) : isolated();
  rep.isolated = base.stats;
  rep.t_isolated = base.stats.mean;
  if (cfg.aggressor) {
    RunResult c = run_victim(cfg, true, trace);
    rep.contended = c.stats;
    if (contended_run) *contended_run = std::move(c);
  } else {
    rep.contended = rep.isolated;
    if (contended_run) *contended_run = base;
  }
  rep.t_contended = rep.contended.mean;
  rep.impact = congestion_impact(rep.t_isolated, rep.t_contended);
  rep.unstable = rep.isolated.unstable || rep.contended.unstable;
  return rep;
}

}  // namespace dflysim
