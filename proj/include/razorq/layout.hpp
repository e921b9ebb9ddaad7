// SPDX-License-Identifier: Apache-2.0
//
// Per-output-channel precision assignment. Each row of a weight matrix is
// either 4-bit (flag 1) or ternary (flag 0); rho is the requested fraction of
// 4-bit rows.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace razorq {

enum class AllocationScheme {
  kSuperGroup,  ///< one 4-bit row at the start of every period-row block
  kStacked,     ///< all 4-bit rows contiguous from row 0
  kRandom,      ///< 4-bit rows drawn uniformly without replacement
};

std::string to_string(AllocationScheme s);
AllocationScheme parse_scheme(const std::string& s);

/// Nominal bits of a ternary weight, log2(3) truncated the way bit-widths are
/// quoted ("1.58-bit").
inline constexpr double kTernaryBits = 1.58;
inline constexpr double kInt4Bits = 4.0;

struct AllocationPlan {
  std::size_t rows = 0;
  double rho = 0.0;
  AllocationScheme scheme = AllocationScheme::kSuperGroup;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint8_t> assignment;  // 1 = 4-bit, 0 = ternary

  std::size_t four_bit_count() const;
  bool is_four_bit(std::size_t row) const { return assignment.at(row) != 0; }
  /// "1000000010000000..." with one character per row.
  std::string bit_string() const;
};

/// Period of the super-group pattern: 1/rho rounded to nearest, ties to even.
/// Requires 0 < rho <= 1.
std::size_t super_group_period(double rho);

/// Throws InputError if rho is outside [0, 1], rows is zero, or a Random plan
/// has no seed.
AllocationPlan build_plan(std::size_t rows, double rho, AllocationScheme scheme,
                          std::optional<std::uint64_t> seed = std::nullopt);

/// A plan with every row at the same precision, used for the layers the
/// allocation does not govern (embedding, output head).
AllocationPlan uniform_plan(std::size_t rows, bool four_bit);

/// Mean nominal bits per weight of the realized assignment.
double effective_bitwidth(const AllocationPlan& plan);

nlohmann::ordered_json plan_to_json(const AllocationPlan& plan);
AllocationPlan plan_from_json(const nlohmann::json& j);

}  // namespace razorq
