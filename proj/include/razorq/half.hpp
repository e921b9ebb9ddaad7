// SPDX-License-Identifier: Apache-2.0
//
// IEEE-754 binary16 helpers. Quantization scales are kept as float values that
// are exactly representable in binary16; these functions do the rounding and
// the bit-level encoding used by the packed format.

#pragma once

#include <cstdint>

namespace razorq::half {

inline constexpr double kMax = 65504.0;

/// Round to the nearest binary16 value (ties to even). Magnitudes that round
/// past kMax become infinity.
double round(double x);

/// Smallest binary16 value strictly greater than a finite, non-negative,
/// representable `h`.
double next_up(double h);

/// Bit pattern of a value that is exactly representable in binary16.
std::uint16_t to_bits(double h);

float from_bits(std::uint16_t bits);

bool is_representable(double x);

}  // namespace razorq::half
