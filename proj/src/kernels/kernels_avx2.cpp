// SPDX-License-Identifier: Apache-2.0
//
// AVX2 variants. Functions carry a target attribute instead of building the
// whole file with -mavx2, so no inline library code compiled for AVX2 can leak
// into the rest of the program through the linker.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "razorq/kernels.hpp"

#define RAZORQ_AVX2 __attribute__((target("avx2")))

namespace razorq::kernels::avx2 {

namespace {

RAZORQ_AVX2 inline std::int32_t hsum_i32(__m256i v) {
  const __m128i sum128 = _mm_add_epi32(_mm256_castsi256_si128(v), _mm256_extracti128_si256(v, 1));
  const __m128i hi64 = _mm_unpackhi_epi64(sum128, sum128);
  const __m128i sum64 = _mm_add_epi32(hi64, sum128);
  const __m128i hi32 = _mm_shuffle_epi32(sum64, _MM_SHUFFLE(2, 3, 0, 1));
  return _mm_cvtsi128_si32(_mm_add_epi32(sum64, hi32));
}

}  // namespace

RAZORQ_AVX2 std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n) {
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const __m256i a_lo = _mm256_cvtepi8_epi16(_mm256_castsi256_si128(va));
    const __m256i a_hi = _mm256_cvtepi8_epi16(_mm256_extracti128_si256(va, 1));
    const __m256i b_lo = _mm256_cvtepi8_epi16(_mm256_castsi256_si128(vb));
    const __m256i b_hi = _mm256_cvtepi8_epi16(_mm256_extracti128_si256(vb, 1));
    // 16x16 -> 32 bit pairwise products; |127*127*2| fits comfortably.
    acc = _mm256_add_epi32(acc, _mm256_madd_epi16(a_lo, b_lo));
    acc = _mm256_add_epi32(acc, _mm256_madd_epi16(a_hi, b_hi));
  }
  for (; i + 16 <= n; i += 16) {
    const __m256i a16 = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(a + i)));
    const __m256i b16 = _mm256_cvtepi8_epi16(_mm_loadu_si128(reinterpret_cast<const __m128i*>(b + i)));
    acc = _mm256_add_epi32(acc, _mm256_madd_epi16(a16, b16));
  }
  std::int32_t sum = hsum_i32(acc);
  for (; i < n; ++i) sum += static_cast<std::int32_t>(a[i]) * static_cast<std::int32_t>(b[i]);
  return sum;
}

RAZORQ_AVX2 void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out) {
  const __m256 vscale = _mm256_set1_ps(scale);
  const __m256 half = _mm256_set1_ps(0.5f);
  const __m256 one = _mm256_set1_ps(1.0f);
  const __m256 sign_mask = _mm256_set1_ps(-0.0f);
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7FFFFFFF));
  const __m256 hi = _mm256_set1_ps(static_cast<float>(limit));
  const __m256 lo = _mm256_set1_ps(-static_cast<float>(limit));
  alignas(32) std::int32_t lanes[8];
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 v = _mm256_div_ps(_mm256_loadu_ps(x + i), vscale);
    // round half away from zero: truncate, then step outward when the
    // discarded fraction is at least one half. v - t is exact.
    __m256 t = _mm256_round_ps(v, _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
    const __m256 frac = _mm256_and_ps(_mm256_sub_ps(v, t), abs_mask);
    const __m256 step = _mm256_or_ps(one, _mm256_and_ps(v, sign_mask));
    t = _mm256_add_ps(t, _mm256_and_ps(_mm256_cmp_ps(frac, half, _CMP_GE_OQ), step));
    t = _mm256_min_ps(_mm256_max_ps(t, lo), hi);
    _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), _mm256_cvtps_epi32(t));
    for (int k = 0; k < 8; ++k) out[i + k] = static_cast<std::int8_t>(lanes[k]);
  }
  if (i < n) scalar::quantize_codes(x + i, n - i, scale, limit, out + i);
}

}  // namespace razorq::kernels::avx2

#endif
