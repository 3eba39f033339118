#pragma once

#include <cstdint>

namespace cmdp {

/// Counter-based pseudo-random generator (splitmix64, Steele/Lea/Flood).
/// Output i of a stream seeded with s is mix(s + (i+1) * 0x9e3779b97f4a7c15),
/// where mix is the finalizer below. The algorithm is fixed so that sampled
/// sequences can be reproduced exactly by other implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform in [0, 1), 53 random bits.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Seed of an independent substream (e.g. one Monte Carlo rollout):
  /// substream(s, i) is output i of the stream seeded with s.
  static std::uint64_t substream(std::uint64_t seed, std::uint64_t index) {
    return mix(seed + (index + 1) * 0x9e3779b97f4a7c15ull);
  }

 private:
  std::uint64_t state_;
};

}  // namespace cmdp
