#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace profpipe {

using Engine = std::mt19937_64;

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& engine, double lo, double hi) {
  return lo + (hi - lo) * uniform01(engine);
}

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t uniform_index(Engine& engine, std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x = engine();
  while (x >= limit) x = engine();
  return x % n;
}

/// Standard normal via Box-Muller (one draw per call; the twin is discarded).
inline double normal(Engine& engine) {
  double u1 = uniform01(engine);
  while (u1 <= 0.0) u1 = uniform01(engine);
  const double u2 = uniform01(engine);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Fisher-Yates permutation of 0..n-1.
inline std::vector<std::size_t> permutation(std::size_t n, Engine& engine) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(engine, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

}  // namespace profpipe
