#include "fpr/rng.hpp"

#include "fpr/errors.hpp"

namespace fpr {

namespace {

// splitmix64, the usual seed scrambler.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == 0) throw InvalidInputError("uniform_index: zero bound");
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream) {
  return mix64(mix64(master ^ mix64(index)) ^ mix64(stream + 0x51ed2701ull));
}

}  // namespace fpr
