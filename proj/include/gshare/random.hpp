#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace gshare {

/// SplitMix64 finalizer (Stafford variant 13). Bijective on 64-bit words.
constexpr std::uint64_t fmix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// Chains fmix64 over (seed, a, b). Changing this function changes every
/// hash layout and derived seed, so it is pinned by kMixerVersion.
constexpr std::uint64_t mix3(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = fmix64(seed + kGolden);
  x = fmix64(x ^ (a + kGolden));
  x = fmix64(x ^ (b + 2 * kGolden));
  return x;
}

constexpr std::uint32_t kMixerVersion = 1;

/// FNV-1a over bytes; used for labels and vocabulary fingerprints.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Labeled sub-seed: every random stream in the program is derived from one
/// master seed through this function.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label,
                                    std::uint64_t index = 0) {
  return mix3(seed, fnv1a64(label), index);
}

/// Seeded generator with implementation-independent draws. std::mt19937_64
/// output is fixed by the standard; the distributions below are written out
/// so results do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), rejection sampled. n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gshare
