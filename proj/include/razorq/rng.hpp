// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace razorq {

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard (and matches the reference MT19937-64 of Matsumoto and Nishimura).
/// The conversions below are written out rather than taken from <random>
/// distributions, whose algorithms are implementation-defined:
///
///   uniform01()    (next() >> 11) * 2^-53
///   below(n)       rejection sampling on next() against the largest multiple of n
///   normal()       Box-Muller on two uniform01() draws, cosine branch only
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();

  /// k distinct indices from [0, n), in ascending order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace razorq
