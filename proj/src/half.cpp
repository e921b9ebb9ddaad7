// SPDX-License-Identifier: Apache-2.0

#include "razorq/half.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "razorq/core.hpp"

namespace razorq::half {

namespace {

constexpr int kMantissaBits = 10;
constexpr int kMinNormalExp = -14;

// Spacing of binary16 values around |x| (x finite, nonzero).
double quantum(double ax) {
  int e = 0;
  std::frexp(ax, &e);  // ax = m * 2^e, m in [0.5, 1)
  const int unbiased = e - 1;
  return std::ldexp(1.0, std::max(unbiased, kMinNormalExp) - kMantissaBits);
}

}  // namespace

double round(double x) {
  if (x == 0.0 || !std::isfinite(x)) return x;
  const double ax = std::abs(x);
  const double q = quantum(ax);
  // nearbyint honours the default round-to-nearest-even mode.
  double r = std::nearbyint(ax / q) * q;
  if (r > kMax) r = std::numeric_limits<double>::infinity();
  return std::copysign(r, x);
}

double next_up(double h) {
  ensure(h >= 0.0 && is_representable(h), "half::next_up needs a representable non-negative value");
  if (h == 0.0) return std::ldexp(1.0, kMinNormalExp - kMantissaBits);
  const double r = h + quantum(h);
  return r > kMax ? std::numeric_limits<double>::infinity() : r;
}

bool is_representable(double x) {
  if (std::isnan(x)) return false;
  if (std::isinf(x)) return true;
  return round(x) == x;
}

std::uint16_t to_bits(double h) {
  ensure(is_representable(h), "value is not representable in binary16");
  std::uint16_t sign = std::signbit(h) ? 0x8000 : 0;
  const double ax = std::abs(h);
  if (ax == 0.0) return sign;
  if (std::isinf(ax)) return sign | 0x7C00;
  int e = 0;
  std::frexp(ax, &e);
  const int unbiased = e - 1;
  if (unbiased < kMinNormalExp) {
    const auto mant = static_cast<std::uint16_t>(std::ldexp(ax, 24));
    return sign | mant;
  }
  const auto exp_field = static_cast<std::uint16_t>(unbiased + 15);
  const auto mant = static_cast<std::uint16_t>(std::ldexp(ax, kMantissaBits - unbiased) - 1024.0);
  return sign | static_cast<std::uint16_t>(exp_field << 10) | mant;
}

float from_bits(std::uint16_t bits) {
  const bool neg = bits & 0x8000;
  const int exp_field = (bits >> 10) & 0x1F;
  const int mant = bits & 0x3FF;
  double v;
  if (exp_field == 0) {
    v = std::ldexp(static_cast<double>(mant), -24);
  } else if (exp_field == 31) {
    v = mant == 0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
  } else {
    v = std::ldexp(static_cast<double>(1024 + mant), exp_field - 25);
  }
  return static_cast<float>(neg ? -v : v);
}

}  // namespace razorq::half
