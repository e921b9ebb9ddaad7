// SPDX-License-Identifier: Apache-2.0
//
// Per-group symmetric quantization.
//
// A matrix is cut into groups of `group_size` consecutive values along its
// input dimension. Each group gets one scale s and integer codes q with
// w ~= s * q:
//
//   ternary   s = max(beta * mean|w|, eps)            q = clip(round(w / s), -1, 1)
//   int4/int8 s = max(max|w| / (2^(n-1) - 1), eps)    q = round(w / s)
//
// round() is half-away-from-zero. Codes are computed against the scale in
// working precision; the stored scale is that value rounded to binary16 (and
// nudged up to the next binary16 value if rounding took it below eps).
// A trailing short group uses its own length in the ternary mean.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "razorq/core.hpp"
#include "razorq/layout.hpp"

namespace razorq {

enum class BitMode : std::uint8_t { kTernary = 0, kInt4 = 1, kInt8 = 2 };

std::string to_string(BitMode m);
/// Largest code magnitude: 1, 7 or 127.
int code_limit(BitMode m);

struct GroupQuantConfig {
  std::size_t group_size = 256;
  double beta = 2.0;
  double epsilon = 1e-5;

  void validate() const;
  std::size_t groups_for(std::size_t length) const { return (length + group_size - 1) / group_size; }
  friend bool operator==(const GroupQuantConfig&, const GroupQuantConfig&) = default;
};

/// Which way groups run. Weights (d_out x d_in) are grouped along each row;
/// activations (d_in x tokens) are grouped down each column.
enum class GroupAxis : std::uint8_t { kRows = 0, kColumns = 1 };

struct GroupCode {
  std::vector<std::int8_t> codes;
  float scale = 0.0f;
};

/// Quantizes one group. `values` may be shorter than group_size (tail group),
/// never longer or empty.
template <typename T>
GroupCode quantize_group(std::span<const T> values, BitMode mode, const GroupQuantConfig& config);

template <typename T>
std::vector<T> dequantize_group(std::span<const std::int8_t> codes, float scale);

/// Integer codes plus binary16 scales for a whole matrix.
///
/// Storage is lane-major: a lane is a row for GroupAxis::kRows and a column
/// for GroupAxis::kColumns, so every group's codes are contiguous. rows()/cols()
/// always report the logical matrix shape.
class QuantizedGroupMatrix {
 public:
  QuantizedGroupMatrix() = default;
  QuantizedGroupMatrix(std::size_t rows, std::size_t cols, GroupAxis axis, GroupQuantConfig config,
                       std::vector<BitMode> lane_modes, std::vector<std::int8_t> codes,
                       std::vector<float> scales);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  GroupAxis axis() const noexcept { return axis_; }
  const GroupQuantConfig& config() const noexcept { return config_; }

  std::size_t lanes() const noexcept { return axis_ == GroupAxis::kRows ? rows_ : cols_; }
  std::size_t lane_length() const noexcept { return axis_ == GroupAxis::kRows ? cols_ : rows_; }
  std::size_t groups_per_lane() const noexcept { return config_.groups_for(lane_length()); }
  std::size_t group_begin(std::size_t g) const noexcept { return g * config_.group_size; }
  std::size_t group_length(std::size_t g) const noexcept {
    return std::min(config_.group_size, lane_length() - group_begin(g));
  }

  BitMode lane_mode(std::size_t lane) const { return lane_modes_.at(lane); }
  const std::vector<BitMode>& lane_modes() const noexcept { return lane_modes_; }

  std::span<const std::int8_t> lane_codes(std::size_t lane) const {
    return {codes_.data() + lane * lane_length(), lane_length()};
  }
  std::span<const std::int8_t> group_codes(std::size_t lane, std::size_t g) const {
    return lane_codes(lane).subspan(group_begin(g), group_length(g));
  }
  float scale(std::size_t lane, std::size_t g) const { return scales_[lane * groups_per_lane() + g]; }

  /// Code at logical position (r, c).
  std::int8_t code_at(std::size_t r, std::size_t c) const {
    return axis_ == GroupAxis::kRows ? codes_[r * cols_ + c] : codes_[c * rows_ + r];
  }

  const std::vector<std::int8_t>& codes() const noexcept { return codes_; }
  const std::vector<float>& scales() const noexcept { return scales_; }

  friend bool operator==(const QuantizedGroupMatrix&, const QuantizedGroupMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  GroupAxis axis_ = GroupAxis::kRows;
  GroupQuantConfig config_;
  std::vector<BitMode> lane_modes_;
  std::vector<std::int8_t> codes_;
  std::vector<float> scales_;
};

/// Quantizes each row of `w` with its own mode, groups running along the row.
template <typename T>
QuantizedGroupMatrix quantize_rows(const Matrix<T>& w, std::span<const BitMode> row_modes,
                                   const GroupQuantConfig& config, unsigned threads = 1);

/// Row i is Int4 where the plan assigns 4-bit, ternary otherwise.
template <typename T>
QuantizedGroupMatrix quantize_matrix(const Matrix<T>& w, const AllocationPlan& plan,
                                     const GroupQuantConfig& config, unsigned threads = 1);

/// Int8 per-group quantization of a (d_in x tokens) activation matrix, groups
/// running down each token column.
template <typename T>
QuantizedGroupMatrix quantize_activations(const Matrix<T>& x, const GroupQuantConfig& config);

template <typename T>
Matrix<T> dequantize(const QuantizedGroupMatrix& q);

/// dequantize(quantize_matrix(w, plan, config))
template <typename T>
Matrix<T> fake_quantize(const Matrix<T>& w, const AllocationPlan& plan, const GroupQuantConfig& config);

/// dequantize(quantize_activations(x, config))
template <typename T>
Matrix<T> fake_quantize_activations(const Matrix<T>& x, const GroupQuantConfig& config);

/// Row modes a plan implies.
std::vector<BitMode> row_modes_for(const AllocationPlan& plan);

}  // namespace razorq
