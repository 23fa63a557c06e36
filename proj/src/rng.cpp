#include "ally/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace ally {

double standard_normal(Rng& rng) {
  // Box-Muller; one variate per call keeps the stream position simple.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_index(rng, i)]);
  return p;
}

}  // namespace ally
