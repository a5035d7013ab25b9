#pragma once

#include <cstdint>
#include <random>

namespace fpr {

// Uniform draw in [0, 1). mt19937_64's output sequence is pinned by the
// standard, and (x >> 11) * 2^-53 is exact double arithmetic, so the same
// seed yields the same reals on every platform. std::uniform_real_distribution
// gives no such guarantee.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Strictly positive draw in (0, 1).
inline double uniform_open01(std::mt19937_64& rng) {
  double x;
  do {
    x = uniform01(rng);
  } while (x == 0.0);
  return x;
}

// Uniform integer in [0, bound) by rejection; bound must be positive.
std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound);

// Stable derivation of per-run seeds from (master seed, run index, stream).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream = 0);

}  // namespace fpr
