// SPDX-License-Identifier: Apache-2.0
//
// Layer-adaptive feature distillation.
//
// Adjacent teacher layers whose outputs are least similar (lowest mean
// cosine) are the ones doing the most work; the feature loss supervises only
// those k layers.

#pragma once

#include <cstdint>
#include <vector>

#include "razorq/core.hpp"

namespace razorq {

/// Hidden states of one batch: layers[0] is the embedding output, layers[l]
/// the output of block l. Each is (positions x d). mask[t] != 0 marks a valid
/// position; all valid positions of the batch are pooled.
class FeatureStack {
 public:
  FeatureStack() = default;
  FeatureStack(std::vector<MatrixD> layers, std::vector<std::uint8_t> mask);

  /// Number of blocks L (one less than the number of feature matrices).
  std::size_t blocks() const noexcept { return layers_.size() - 1; }
  std::size_t positions() const noexcept { return layers_.front().rows(); }
  std::size_t width() const noexcept { return layers_.front().cols(); }
  std::size_t valid_count() const noexcept { return valid_; }

  const MatrixD& layer(std::size_t l) const { return layers_.at(l); }
  const std::vector<MatrixD>& layers() const noexcept { return layers_; }
  const std::vector<std::uint8_t>& mask() const noexcept { return mask_; }
  bool valid(std::size_t t) const { return mask_[t] != 0; }

 private:
  std::vector<MatrixD> layers_;
  std::vector<std::uint8_t> mask_;
  std::size_t valid_ = 0;
};

/// cos(a, b), defined as 0 when either vector is zero.
double cosine(std::span<const double> a, std::span<const double> b);

/// c_l for l = 1..L (returned 0-based: element l-1 is block l): mean over
/// valid positions of cos(F(l)_t, F(l-1)_t).
std::vector<double> layer_cosine_scores(const FeatureStack& teacher);

/// The k blocks with the smallest scores, ties toward the smaller index.
/// Returned as ascending 1-based block indices.
std::vector<std::size_t> select_layers(std::span<const double> scores, std::size_t k);

/// (1/|S|) sum_{l in S} (1/(|T| d)) sum_{t in T} ||F_T(l)_t - F_S(l)_t||^2, with
/// `selected` holding 1-based block indices.
double adaptive_feature_loss(const FeatureStack& teacher, const FeatureStack& student,
                             std::span<const std::size_t> selected);

/// Gradient of adaptive_feature_loss with respect to each student feature
/// matrix (zero for unselected layers and masked positions).
std::vector<MatrixD> adaptive_feature_grad(const FeatureStack& teacher, const FeatureStack& student,
                                           std::span<const std::size_t> selected);

/// counts[l-1] = number of stacks whose selection contains block l.
std::vector<std::size_t> layer_frequency_analysis(std::span<const FeatureStack> stacks, std::size_t k);

}  // namespace razorq
