#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace mempo {

// All randomness in the project flows through these helpers so that runs are
// reproducible bit-for-bit from a single seed. std::mt19937_64 is specified
// by the standard; the distributions below are hand-rolled because the
// standard library ones are implementation-defined.
using Rng = std::mt19937_64;

// Derives an independent stream from a base seed and a path of indices
// (update, query, rollout, ...). SplitMix64 finalizer per step.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  std::uint64_t z = base;
  for (std::uint64_t p : path) {
    z += 0x9e3779b97f4a7c15ull + p * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
  }
  return z;
}

// Uniform double in [0, 1) with 53 bits of entropy.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Rejection-free modulo bias is negligible for the
// small n used here, but we reject anyway to stay exact.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Standard normal via Box-Muller on the deterministic uniforms.
inline double normal01(Rng& rng) {
  double u1 = uniform01(rng);
  double u2 = uniform01(rng);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Fisher-Yates with the deterministic index sampler.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace mempo
