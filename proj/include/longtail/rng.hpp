#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace longtail {

// 53-bit uniform in [0,1), bit-stable across platforms.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Box-Muller standard normal; exactly two draws per sample so the stream
// position never depends on the values drawn.
inline double normal01(std::mt19937_64& rng) {
  double u1 = 1.0 - uniform01(rng);  // (0, 1], keeps the log finite
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace longtail
