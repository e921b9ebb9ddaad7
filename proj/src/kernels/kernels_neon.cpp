// SPDX-License-Identifier: Apache-2.0

#if defined(__aarch64__)

#include <arm_neon.h>

#include "razorq/kernels.hpp"

namespace razorq::kernels::neon {

std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  int32x4_t acc = vdupq_n_s32(0);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    const int8x16_t va = vld1q_s8(a + i);
    const int8x16_t vb = vld1q_s8(b + i);
    const int16x8_t lo = vmull_s8(vget_low_s8(va), vget_low_s8(vb));
    const int16x8_t hi = vmull_s8(vget_high_s8(va), vget_high_s8(vb));
    acc = vpadalq_s16(acc, lo);
    acc = vpadalq_s16(acc, hi);
  }
  std::int32_t sum = vaddvq_s32(acc);
  for (; i < n; ++i) sum += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  return sum;
}

void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out) {
  const float32x4_t vscale = vdupq_n_f32(scale);
  const float32x4_t hi = vdupq_n_f32(static_cast<float>(limit));
  const float32x4_t lo = vdupq_n_f32(-static_cast<float>(limit));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t v = vdivq_f32(vld1q_f32(x + i), vscale);
    // vrndaq rounds to nearest with ties away from zero.
    const float32x4_t q = vminq_f32(vmaxq_f32(vrndaq_f32(v), lo), hi);
    std::int32_t lanes[4];
    vst1q_s32(lanes, vcvtq_s32_f32(q));
    for (int k = 0; k < 4; ++k) out[i + k] = static_cast<std::int8_t>(lanes[k]);
  }
  if (i < n) scalar::quantize_codes(x + i, n - i, scale, limit, out + i);
}

}  // namespace razorq::kernels::neon

#endif
