// SPDX-License-Identifier: Apache-2.0
//
// Inner-loop kernels with a scalar reference implementation and SIMD variants
// (AVX2 on x86-64, NEON on AArch64) chosen at runtime. Every variant must
// produce bit-identical results to the scalar one: the kernels here are either
// exact integer arithmetic or elementwise IEEE operations with no reductions.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace razorq::kernels {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

/// ISAs usable on this machine, scalar first.
std::vector<Isa> available_isas();

/// The ISA currently used by the dispatching entry points. Defaults to the
/// best available one.
Isa active_isa();

/// Switches the dispatching entry points (tests use this to compare
/// variants). Throws InputError if `isa` is not available here.
void force_isa(Isa isa);

/// Sum of a[i] * b[i], accumulated exactly in 32 bits.
/// Exact for n * 127 * 127 < 2^31, i.e. n up to ~133k.
std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n);

/// out[i] = clamp(round_half_away(x[i] / scale), -limit, limit)
void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out);

// Direct access to each variant, for equivalence tests and benchmarks.
namespace scalar {
std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n);
void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n);
void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
std::int32_t dot_i8(const std::int8_t* a, const std::int8_t* b, std::size_t n);
void quantize_codes(const float* x, std::size_t n, float scale, int limit, std::int8_t* out);
}  // namespace neon
#endif

}  // namespace razorq::kernels
