// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "razorq/kernels.hpp"

namespace razorq::kernels::scalar {

std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  std::int32_t acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  return acc;
}

void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out) {
  const float lim = static_cast<float>(limit);
  for (std::size_t i = 0; i < n; ++i) {
    const float q = std::round(x[i] / scale);  // ties away from zero
    out[i] = static_cast<std::int8_t>(std::clamp(q, -lim, lim));
  }
}

}  // namespace razorq::kernels::scalar
