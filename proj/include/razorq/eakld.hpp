// SPDX-License-Identifier: Apache-2.0
//
// Entropy-aware KL distillation.
//
// lambda is the teacher's normalized entropy, min(H, ln K) / ln K, averaged
// per sample over valid positions and then over samples. The loss mixes the
// two KL directions:
//
//   EAKLD = lambda * KL(P_T || P_S) + (1 - lambda) * KL(P_S || P_T)
//
// Uncertain teachers (high entropy) lean on forward KL (mode covering);
// confident ones on reverse KL. Logs are natural; probabilities are floored at
// 1e-12 inside every log. No temperature.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "razorq/core.hpp"

namespace razorq {

inline constexpr double kProbFloor = 1e-12;

/// Per-position teacher and student logits (positions x vocab).
///
/// sample_ids[t] names the sequence position t belongs to; reductions average
/// over valid positions within a sample, then over samples that have at least
/// one valid position. When no sample ids are given the whole batch is one
/// sample.
struct LogitBatch {
  MatrixD teacher;
  MatrixD student;
  std::optional<std::vector<std::int64_t>> labels;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> sample_ids;

  /// Throws InputError on shape mismatch, non-finite logits, labels outside
  /// the vocabulary or an empty mask. Fills sample_ids with zeros if empty.
  void validate();
};

struct KldConfig {
  std::size_t k = 16;  ///< entropy cap: ln K
  void validate() const;
};

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

/// -sum p ln p, with 0 ln 0 = 0.
double token_entropy(std::span<const double> p);

double mixing_lambda(const LogitBatch& batch, const KldConfig& cfg);
double forward_kld(const LogitBatch& batch);
double reverse_kld(const LogitBatch& batch);
double eakld_loss(const LogitBatch& batch, const KldConfig& cfg);

/// Mean probability the teacher gives the label token, over valid positions.
double cakld_coefficient(const LogitBatch& batch);
/// c * forward + (1 - c) * reverse with c = cakld_coefficient.
double cakld_loss(const LogitBatch& batch);

struct MismatchRate {
  double high_conf_fraction = 0.0;
  double mismatch_fraction = 0.0;
};

/// Among valid positions where the teacher's top probability exceeds
/// `threshold`, the fraction whose argmax differs from the label.
MismatchRate mismatch_rate(const LogitBatch& batch, double threshold);

/// d(mix * forward + (1 - mix) * reverse) / d(student logits), mix held
/// constant. Rows of masked positions are zero.
MatrixD mixed_kld_grad(const LogitBatch& batch, double mix);

/// Gradient of eakld_loss with respect to the student logits; lambda is
/// treated as a constant.
MatrixD eakld_grad(const LogitBatch& batch, const KldConfig& cfg);

}  // namespace razorq
