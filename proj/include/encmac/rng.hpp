// Copyright 2026 the encmac authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>

namespace encmac {

// splitmix64 stream. Chosen over std::mt19937 so that seeded artifacts are
// reproducible across standard libraries and platforms, not just across runs.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform draw in [0, n). Multiply-high mapping; the bias for n up to a few
  // hundred is below 2^-55 and the mapping is platform-independent.
  std::uint64_t bounded(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on two uniform draws.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t hash_mix(std::uint64_t x) {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  x ^= x >> 33;
  return x;
}

// Sub-seed derivation used by every seeded pipeline stage: sample `index` of a
// search at output width `width` draws from SplitMix64(sub_seed(master, width,
// index)). Documented in the README; changing it changes every artifact.
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t width,
                              std::uint64_t index) {
  std::uint64_t h = hash_mix(master ^ 0x9e3779b97f4a7c15ull);
  h = hash_mix(h + 0x517cc1b727220a95ull * width);
  h = hash_mix(h + 0x2545f4914f6cdd1dull * index);
  return h;
}

}  // namespace encmac
