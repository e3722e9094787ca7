#ifndef SATPOSE_RNG_HPP
#define SATPOSE_RNG_HPP

#include <cmath>
#include <cstdint>

namespace satpose {

/// Advances a splitmix64 state and returns the next output word.
/// Used both as the core generator and to derive independent substreams.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Stateless hash of (seed, index) to a 64-bit word. The basis of the
/// per-sample substream contract: identical (seed, index) gives identical
/// output on every platform.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x9e3779b97f4a7c15ull * (index + 1));
  std::uint64_t a = splitmix64_next(s);
  std::uint64_t b = splitmix64_next(s);
  return a ^ (b << 1);
}

/// Small deterministic generator. All randomness in the library flows through
/// this type with an explicit seed; there is no global RNG state. The uniform
/// and normal draws use only IEEE double arithmetic on integer hash output,
/// so streams replay identically across runs.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // Warm up so that small seeds do not produce correlated first draws.
    splitmix64_next(state_);
  }

  std::uint64_t next_u64() { return splitmix64_next(state_); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] inclusive, unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span) - 1;
    std::uint64_t draw = next_u64();
    while (draw > limit) draw = next_u64();
    return lo + static_cast<std::int64_t>(draw % span);
  }

  /// Standard normal via Box-Muller. Two uniforms are consumed per draw and
  /// the second output is discarded, keeping the stream position predictable.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

private:
  std::uint64_t state_;
};

/// Substream generator for sample `index` of a run seeded with `seed`.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t index) {
  return Rng(mix_seed(seed, index));
}

}  // namespace satpose

#endif  // SATPOSE_RNG_HPP
