#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <span>

namespace lhc::detail {

// The std:: distributions are implementation-defined; these helpers keep
// generated data identical across standard libraries for a given seed.

inline double unit(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t uniform_index(std::mt19937_64 &rng, std::size_t n) {
  return std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
}

inline double normal(std::mt19937_64 &rng) {
  const double u1 = 1.0 - unit(rng); // (0, 1]
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::size_t categorical(std::mt19937_64 &rng, std::span<const double> probs) {
  double r = unit(rng);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (r < probs[i]) return i;
    r -= probs[i];
  }
  return probs.size() - 1;
}

} // namespace lhc::detail
