// SPDX-License-Identifier: Apache-2.0

#include "razorq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "razorq/core.hpp"

namespace razorq {

std::uint64_t SeededRng::below(std::uint64_t n) {
  require(n > 0, "SeededRng::below needs a positive bound");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return x % n;
}

double SeededRng::normal() {
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> SeededRng::sample_without_replacement(std::size_t n, std::size_t k) {
  require(k <= n, "cannot sample more items than the population holds");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace razorq
