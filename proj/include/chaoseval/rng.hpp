#ifndef CHAOSEVAL_RNG_HPP
#define CHAOSEVAL_RNG_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace chaoseval {

/// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for an independent stream identified by `seed` and a path of ids,
/// e.g. stream_seed(seed, {video, frame}).
inline constexpr std::uint64_t stream_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(seed);
  for (auto id : path) h = mix64(h ^ id);
  return h;
}

/// Portable random source: mt19937_64 (its output sequence is fixed by the
/// standard) with the value mappings done here rather than by the
/// implementation-defined <random> distributions.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next());
    // rejection sampling removes modulo bias
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

private:
  std::mt19937_64 engine_;
};

} // namespace chaoseval

#endif // CHAOSEVAL_RNG_HPP
