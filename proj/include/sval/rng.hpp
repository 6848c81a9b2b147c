#pragma once

#include <cstdint>
#include <random>

namespace sval {

using Rng = std::mt19937_64;

/// Deterministic stream for a (seed, a, b, c) tuple, e.g. (seed, epoch,
/// image index, purpose tag).
Rng derive_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
               std::uint64_t c = 0);

// Distribution helpers with fixed algorithms so sequences do not depend on
// the standard library's distribution implementations.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
/// Uniform integer in [0, n).
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);
double standard_normal(Rng& rng);
bool bernoulli(Rng& rng, double p);

template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = static_cast<std::uint64_t>(last - first);
  for (std::uint64_t i = n; i > 1; --i) {
    const std::uint64_t j = uniform_index(rng, i);
    std::swap(first[i - 1], first[j]);
  }
}

}  // namespace sval
