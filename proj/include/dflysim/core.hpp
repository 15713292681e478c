#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace dflysim {

// Simulated time in integer nanoseconds since the start of a run.
struct SimTime {
  std::int64_t ns = 0;

  constexpr SimTime() = default;
  constexpr explicit SimTime(std::int64_t v) : ns(v) {}

  static constexpr SimTime max() { return SimTime{std::numeric_limits<std::int64_t>::max()}; }

  friend constexpr auto operator<=>(SimTime, SimTime) = default;
  friend constexpr SimTime operator+(SimTime a, SimTime b) { return SimTime{a.ns + b.ns}; }
  friend constexpr SimTime operator-(SimTime a, SimTime b) { return SimTime{a.ns - b.ns}; }
  constexpr SimTime& operator+=(SimTime o) {
    ns += o.ns;
    return *this;
  }
};

constexpr SimTime nanoseconds(std::int64_t v) { return SimTime{v}; }
constexpr SimTime microseconds(double v) { return SimTime{static_cast<std::int64_t>(v * 1e3)}; }

using EndpointId = std::uint32_t;
using SwitchId = std::uint32_t;
using PortId = std::uint32_t;
using LinkId = std::uint32_t;
using ClassId = std::uint32_t;
using JobId = std::uint32_t;

inline constexpr std::uint32_t kInvalidId = std::numeric_limits<std::uint32_t>::max();

// Packets never carry more than this many payload bytes; larger messages are segmented.
inline constexpr std::uint32_t kMaxPayloadBytes = 4096;

// SplitMix64 finalizer, used to derive independent per-component seeds from one run seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// SplitMix64 generator. Seeding costs nothing, so the network opens one stream per packet and
// switch: a packet's draws then do not depend on how much other traffic passed before it.
class Rng {
 public:
  using result_type = std::uint64_t;
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}
  void seed(std::uint64_t s) { state_ = s; }
  result_type operator()() {
    const std::uint64_t out = mix_seed(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

 private:
  std::uint64_t state_;
};

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return mix_seed(mix_seed(seed ^ mix_seed(stream)) + index);
}

// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) { return n == 0 ? 0 : rng() % n; }

// Raised for invalid scenario/config input. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for failures while a simulation is executing. The CLI maps it to exit code 2.
class SimulationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dflysim
