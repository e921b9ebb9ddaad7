// SPDX-License-Identifier: Apache-2.0

#include "razorq/quantizer.hpp"

#include <cmath>
#include <type_traits>

#include "razorq/half.hpp"
#include "razorq/kernels.hpp"

namespace razorq {

std::string to_string(BitMode m) {
  switch (m) {
    case BitMode::kTernary: return "ternary";
    case BitMode::kInt4: return "int4";
    case BitMode::kInt8: return "int8";
  }
  throw InvariantError("unknown BitMode");
}

int code_limit(BitMode m) {
  switch (m) {
    case BitMode::kTernary: return 1;
    case BitMode::kInt4: return 7;
    case BitMode::kInt8: return 127;
  }
  throw InvariantError("unknown BitMode");
}

void GroupQuantConfig::validate() const {
  require(group_size >= 1, "group size must be at least 1");
  require(std::isfinite(beta) && beta > 0.0, "beta must be positive");
  require(std::isfinite(epsilon) && epsilon > 0.0, "epsilon must be positive");
  require(half::round(epsilon) <= half::kMax, "epsilon does not fit in a 16-bit scale");
}

namespace {

// Scale as stored: binary16, never below epsilon.
float storage_scale(double s, double epsilon) {
  double h = half::round(s);
  if (!std::isfinite(h)) throw InputError("group scale overflows the 16-bit scale range");
  while (h < epsilon) h = half::next_up(h);
  return static_cast<float>(h);
}

template <typename T>
T working_scale(std::span<const T> values, BitMode mode, const GroupQuantConfig& config) {
  const T eps = static_cast<T>(config.epsilon);
  if (mode == BitMode::kTernary) {
    T sum = 0;
    for (T v : values) sum += std::abs(v);
    const T mean = sum / static_cast<T>(values.size());
    return std::max(static_cast<T>(config.beta) * mean, eps);
  }
  T amax = 0;
  for (T v : values) amax = std::max(amax, std::abs(v));
  return std::max(amax / static_cast<T>(code_limit(mode)), eps);
}

template <typename T>
void codes_for(std::span<const T> values, T scale, int limit, std::int8_t* out) {
  if constexpr (std::is_same_v<T, float>) {
    kernels::quantize_codes(values.data(), values.size(), scale, limit, out);
  } else {
    const T lim = static_cast<T>(limit);
    for (std::size_t i = 0; i < values.size(); ++i)
      out[i] = static_cast<std::int8_t>(std::clamp(std::round(values[i] / scale), -lim, lim));
  }
}

// Quantizes one group into `out`, returning the stored scale.
template <typename T>
float quantize_group_into(std::span<const T> values, BitMode mode, const GroupQuantConfig& config,
                          std::int8_t* out) {
  for (T v : values)
    if (!std::isfinite(v)) throw InputError("cannot quantize non-finite value");
  const T s = working_scale(values, mode, config);
  codes_for(values, s, code_limit(mode), out);
  return storage_scale(static_cast<double>(s), config.epsilon);
}

}  // namespace

template <typename T>
GroupCode quantize_group(std::span<const T> values, BitMode mode, const GroupQuantConfig& config) {
  config.validate();
  require(!values.empty() && values.size() <= config.group_size,
          "group length must be between 1 and the group size");
  GroupCode g;
  g.codes.resize(values.size());
  g.scale = quantize_group_into(values, mode, config, g.codes.data());
  return g;
}

template <typename T>
std::vector<T> dequantize_group(std::span<const std::int8_t> codes, float scale) {
  std::vector<T> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) out[i] = static_cast<T>(scale) * static_cast<T>(codes[i]);
  return out;
}

QuantizedGroupMatrix::QuantizedGroupMatrix(std::size_t rows, std::size_t cols, GroupAxis axis,
                                           GroupQuantConfig config, std::vector<BitMode> lane_modes,
                                           std::vector<std::int8_t> codes, std::vector<float> scales)
    : rows_(rows),
      cols_(cols),
      axis_(axis),
      config_(config),
      lane_modes_(std::move(lane_modes)),
      codes_(std::move(codes)),
      scales_(std::move(scales)) {
  config_.validate();
  require(lane_modes_.size() == lanes(), "one bit mode per lane is required");
  require(codes_.size() == rows_ * cols_, "code count does not match the matrix shape");
  require(scales_.size() == lanes() * groups_per_lane(), "scale count does not match the group layout");
  for (std::size_t lane = 0; lane < lanes(); ++lane) {
    const int lim = code_limit(lane_modes_[lane]);
    for (std::int8_t c : lane_codes(lane))
      require(c >= -lim && c <= lim, "code " + std::to_string(c) + " is out of range for " +
                                         to_string(lane_modes_[lane]));
  }
  for (float s : scales_)
    require(std::isfinite(s) && s >= config_.epsilon && half::is_representable(s),
            "scales must be finite binary16 values no smaller than epsilon");
}

std::vector<BitMode> row_modes_for(const AllocationPlan& plan) {
  std::vector<BitMode> modes(plan.rows);
  for (std::size_t i = 0; i < plan.rows; ++i)
    modes[i] = plan.is_four_bit(i) ? BitMode::kInt4 : BitMode::kTernary;
  return modes;
}

template <typename T>
QuantizedGroupMatrix quantize_rows(const Matrix<T>& w, std::span<const BitMode> row_modes,
                                   const GroupQuantConfig& config, unsigned threads) {
  config.validate();
  require(row_modes.size() == w.rows(), "row mode count does not match the matrix rows");
  require(w.cols() >= 1, "cannot quantize a matrix with no columns");
  const std::size_t groups = config.groups_for(w.cols());
  std::vector<std::int8_t> codes(w.size());
  std::vector<float> scales(w.rows() * groups);
  parallel_for(w.rows(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const auto row = w.row(r);
      for (std::size_t g = 0; g < groups; ++g) {
        const std::size_t b = g * config.group_size;
        const std::size_t len = std::min(config.group_size, w.cols() - b);
        scales[r * groups + g] =
            quantize_group_into(row.subspan(b, len), row_modes[r], config, codes.data() + r * w.cols() + b);
      }
    }
  });
  return QuantizedGroupMatrix(w.rows(), w.cols(), GroupAxis::kRows, config,
                              std::vector<BitMode>(row_modes.begin(), row_modes.end()), std::move(codes),
                              std::move(scales));
}

template <typename T>
QuantizedGroupMatrix quantize_matrix(const Matrix<T>& w, const AllocationPlan& plan,
                                     const GroupQuantConfig& config, unsigned threads) {
  require(plan.rows == w.rows(), "allocation plan has " + std::to_string(plan.rows) + " rows, matrix has " +
                                     std::to_string(w.rows()));
  const auto modes = row_modes_for(plan);
  return quantize_rows(w, std::span<const BitMode>(modes), config, threads);
}

template <typename T>
QuantizedGroupMatrix quantize_activations(const Matrix<T>& x, const GroupQuantConfig& config) {
  // Column-wise groups are row-wise groups of the transpose; storage is the
  // transposed (token-major) layout either way.
  const Matrix<T> xt = x.transposed();
  const std::vector<BitMode> modes(xt.rows(), BitMode::kInt8);
  auto q = quantize_rows(xt, std::span<const BitMode>(modes), config);
  return QuantizedGroupMatrix(x.rows(), x.cols(), GroupAxis::kColumns, config, q.lane_modes(), q.codes(),
                              q.scales());
}

template <typename T>
Matrix<T> dequantize(const QuantizedGroupMatrix& q) {
  Matrix<T> out(q.rows(), q.cols());
  for (std::size_t lane = 0; lane < q.lanes(); ++lane) {
    for (std::size_t g = 0; g < q.groups_per_lane(); ++g) {
      const T s = static_cast<T>(q.scale(lane, g));
      const auto codes = q.group_codes(lane, g);
      const std::size_t b = q.group_begin(g);
      for (std::size_t k = 0; k < codes.size(); ++k) {
        const T v = s * static_cast<T>(codes[k]);
        if (q.axis() == GroupAxis::kRows)
          out(lane, b + k) = v;
        else
          out(b + k, lane) = v;
      }
    }
  }
  return out;
}

template <typename T>
Matrix<T> fake_quantize(const Matrix<T>& w, const AllocationPlan& plan, const GroupQuantConfig& config) {
  return dequantize<T>(quantize_matrix(w, plan, config));
}

template <typename T>
Matrix<T> fake_quantize_activations(const Matrix<T>& x, const GroupQuantConfig& config) {
  return dequantize<T>(quantize_activations(x, config));
}

#define RAZORQ_INSTANTIATE(T)                                                                            \
  template GroupCode quantize_group<T>(std::span<const T>, BitMode, const GroupQuantConfig&);           \
  template std::vector<T> dequantize_group<T>(std::span<const std::int8_t>, float);                     \
  template QuantizedGroupMatrix quantize_rows<T>(const Matrix<T>&, std::span<const BitMode>,            \
                                                 const GroupQuantConfig&, unsigned);                    \
  template QuantizedGroupMatrix quantize_matrix<T>(const Matrix<T>&, const AllocationPlan&,             \
                                                   const GroupQuantConfig&, unsigned);                  \
  template QuantizedGroupMatrix quantize_activations<T>(const Matrix<T>&, const GroupQuantConfig&);     \
  template Matrix<T> dequantize<T>(const QuantizedGroupMatrix&);                                        \
  template Matrix<T> fake_quantize<T>(const Matrix<T>&, const AllocationPlan&, const GroupQuantConfig&); \
  template Matrix<T> fake_quantize_activations<T>(const Matrix<T>&, const GroupQuantConfig&);

RAZORQ_INSTANTIATE(float)
RAZORQ_INSTANTIATE(double)

#undef RAZORQ_INSTANTIATE

}  // namespace razorq
