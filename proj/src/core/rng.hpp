// Copyright (c) 2026 The codemae authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace codemae {

using Rng = std::mt19937_64;

// Stable stream derivation so independent consumers (batches, masks, scenes)
// never share state: child seed = mix(master, tag, index).
inline std::uint64_t mix_seed(std::uint64_t master, std::uint64_t tag,
                              std::uint64_t index = 0) {
  std::uint64_t x = master ^ (tag * 0x9e3779b97f4a7c15ULL) ^
                    (index * 0xbf58476d1ce4e5b9ULL) ^ 0x94d049bb133111ebULL;
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mu = 0.0, double sigma = 1.0) {
  return std::normal_distribution<double>(mu, sigma)(rng);
}

// Truncated at +-2 sigma, the usual transformer init.
inline double trunc_normal(Rng& rng, double sigma) {
  for (;;) {
    double v = normal(rng, 0.0, sigma);
    if (v >= -2.0 * sigma && v <= 2.0 * sigma) return v;
  }
}

}  // namespace codemae
