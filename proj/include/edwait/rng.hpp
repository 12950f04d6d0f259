#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace edwait {

/// SplitMix64 stream with 8 bytes of state. Each simulation purpose (arrivals
/// per CTAS, balking draws, service times, predictor noise) gets its own
/// stream so that forked counterfactual runs share random numbers with the
/// factual run, and cloning a simulator stays cheap.
class RandomStream {
 public:
  RandomStream() = default;
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) : state_(mix(seed ^ mix(stream_id + kGolden))) {}

  std::uint64_t next_u64() {
    state_ += kGolden;
    return mix(state_);
  }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double mean) { return -mean * std::log(uniform()); }

  /// Standard normal via Box-Muller; consumes two uniforms and caches nothing.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_ = 0;
};

}  // namespace edwait
