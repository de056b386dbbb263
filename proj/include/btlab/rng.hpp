#pragma once

// SplitMix64: a Weyl-sequence increment followed by two xor-shift-multiply
// rounds. The state is a single u64, so streams serialize trivially.
//
// Independent sub-streams are derived by hashing a key tuple, e.g.
// (seed, sample index, epoch, view, transform). Two draws from the same key
// are identical regardless of which thread or in which order they run.
//
// Distributions are implemented here rather than through <random> because
// std:: distributions are implementation-defined and would break bitwise
// reproducibility across standard libraries.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace btlab {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  static constexpr const char* kAlgorithm = "splitmix64";

  explicit Rng(std::uint64_t state = 0) : state_(state) {}

  /// Stream keyed by a tuple of integers.
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
    std::uint64_t h = splitmix64_mix(seed + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t k : key) h = splitmix64_mix(h ^ (k + 0x9e3779b97f4a7c15ULL + (h << 6)));
    return Rng(h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64_mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Multiply-shift reduction; n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller (two uniforms per draw, no caching).
  double normal() {
    double u1 = uniform();
    const double u2 = uniform();
    if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

}  // namespace btlab
