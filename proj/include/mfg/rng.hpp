#pragma once

#include <cstdint>

namespace mfg {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so results never depend on evaluation order
/// or thread count.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL))) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const {
    return mix64(key_ ^ mix64(counter));
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on counters 2c and 2c+1.
  double normal(std::uint64_t counter) const;

  CounterRng substream(std::uint64_t id) const { return CounterRng(key_, id); }

  /// Seed of a derived substream; reproduces it through CounterRng(seed, 0) style reuse.
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
};

/// Sequential draws from one counter stream.
class RngStream {
 public:
  explicit RngStream(CounterRng rng, std::uint64_t start = 0) : rng_(rng), counter_(start) {}
  double uniform() { return rng_.uniform(counter_++); }
  double normal() { return rng_.normal(counter_++); }
  std::uint64_t bits() { return rng_.bits(counter_++); }
  std::uint64_t counter() const { return counter_; }

 private:
  CounterRng rng_;
  std::uint64_t counter_;
};

/// Reserved stream identifiers; particle streams use their index directly.
namespace streams {
inline constexpr std::uint64_t kCommonNoise = 0x4000000000000001ULL;
inline constexpr std::uint64_t kTheta = 0x4000000000000002ULL;
inline constexpr std::uint64_t kResample = 0x4000000000000003ULL;
inline constexpr std::uint64_t kTagged = 0x4000000000000004ULL;
inline constexpr std::uint64_t kReference = 0x4000000000000005ULL;
inline constexpr std::uint64_t kPerturbation = 0x4000000000000006ULL;
}  // namespace streams

}  // namespace mfg
