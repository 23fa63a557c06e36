#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace ally {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-streams from one seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) noexcept {
  return mix_seed(mix_seed(base) ^ (tag * 0xd6e8feb86659fd93ULL));
}

// Uniform index in [0, n). Avoids std::uniform_int_distribution so the
// sequence does not depend on the standard library implementation.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return static_cast<std::size_t>(v % n);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng);

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace ally
