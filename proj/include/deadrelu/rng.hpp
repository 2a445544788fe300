// Counter-based random streams.
//
// Every random object in a run is drawn from its own stream whose seed is
// derived from (master seed, replicate, trajectory, step, role) through
// mix64. Streams never share state, so results do not depend on the order
// or thread in which they are consumed.
//
// Seed path:
//   seed = mix64(master)
//   for v in (replicate, trajectory, step, role): seed = mix64(seed ^ (v + 1) * 0x9E3779B97F4A7C15)
//
// The stream itself is SplitMix64 started at that seed. Doubles are taken
// from the top 53 bits, so every value is reproducible bit-for-bit across
// platforms (unlike the std:: distributions, whose algorithms are
// implementation-defined).
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace deadrelu {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

enum class StreamRole : std::uint64_t {
  init = 1,
  training_batch = 2,
  validation = 3,
  true_risk = 4,
  floor_estimate = 5,
  probe = 6,
};

struct SeedPath {
  std::uint64_t master = 0;
  std::uint64_t replicate = 0;
  std::uint64_t trajectory = 0;
  std::uint64_t step = 0;

  constexpr std::uint64_t derive(StreamRole role) const {
    constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
    std::uint64_t s = mix64(master);
    for (std::uint64_t v : {replicate, trajectory, step, static_cast<std::uint64_t>(role)}) {
      s = mix64(s ^ ((v + 1) * golden));
    }
    return s;
  }
};

/// SplitMix64 stream; satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr Rng(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal by Box-Muller; uses two uniforms per call.
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::uint64_t state_;
};

inline Rng make_rng(const SeedPath& path, StreamRole role) { return Rng(path.derive(role)); }

}  // namespace deadrelu
