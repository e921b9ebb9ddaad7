// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale quantization-aware distillation.
//
// ToyModel is a stack of residual MLP blocks over token embeddings, with no
// attention:
//
//   h_0 = E[token]
//   h_l = h_{l-1} + tanh(g_l * (h_{l-1} W1_l^T)) W2_l^T      l = 1..L
//   logits = h_L H^T
//
// Every position is processed independently, so a batch is just a set of
// token rows. In the student, W1/W2 are fake-quantized per an allocation plan
// and E/H at Int4; gains g_l stay in full precision. Gradients pass straight
// through every quantizer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "razorq/core.hpp"
#include "razorq/eakld.hpp"
#include "razorq/lafd.hpp"
#include "razorq/mpgemm.hpp"
#include "razorq/layout.hpp"
#include "razorq/quantizer.hpp"
#include "razorq/rng.hpp"

namespace razorq {

struct ModelShape {
  std::size_t vocab = 64;
  std::size_t d_model = 32;
  std::size_t d_hidden = 64;
  std::size_t layers = 6;

  void validate() const;
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

struct Block {
  MatrixD up;    // d_hidden x d_model
  MatrixD down;  // d_model x d_hidden
  double gain = 1.0;

  friend bool operator==(const Block&, const Block&) = default;
};

struct ToyModel {
  ModelShape shape;
  MatrixD embedding;  // vocab x d_model
  std::vector<Block> blocks;
  MatrixD head;  // vocab x d_model

  /// Gaussian init from `seed`: E ~ N(0, 1), W ~ N(0, 1/fan_in), gains 1.
  static ToyModel init(const ModelShape& shape, std::uint64_t seed);
  bool all_finite() const;
  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

/// How the student's weights are quantized. Absent quantization (teacher, or
/// the pass-through mode used for gradient checks) every matrix is used as is.
struct StudentQuant {
  GroupQuantConfig config{32, 2.0, 1e-5};
  std::vector<AllocationPlan> up_plans;    // one per block
  std::vector<AllocationPlan> down_plans;  // one per block
  int activation_bits = 16;

  static StudentQuant build(const ModelShape& shape, double rho, AllocationScheme scheme, std::uint64_t seed,
                            const GroupQuantConfig& config, int activation_bits);
};

/// A batch of `sequences` sequences of `seq_len` tokens, flattened
/// position-major (row = sequence * seq_len + position).
struct TokenBatch {
  std::size_t sequences = 0;
  std::size_t seq_len = 0;
  std::vector<std::int64_t> tokens;
  std::vector<std::int64_t> labels;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> sample_ids;

  std::size_t positions() const noexcept { return tokens.size(); }
};

/// Previous-token prediction on Markov sequences: x_0 is uniform and
/// x_t = perm(x_{t-1}), replaced by a uniform token with probability `noise`.
/// The label at position t is x_{t-1}; position 0 is masked.
class CopyTask {
 public:
  CopyTask(std::size_t vocab, std::size_t seq_len, double noise, std::uint64_t seed);

  TokenBatch sample(std::size_t sequences, SeededRng& rng) const;
  const std::vector<std::size_t>& permutation() const noexcept { return perm_; }

 private:
  std::size_t vocab_;
  std::size_t seq_len_;
  double noise_;
  std::vector<std::size_t> perm_;
};

struct ForwardResult {
  std::vector<MatrixD> features;  // L + 1 matrices, positions x d_model
  MatrixD logits;                 // positions x vocab
};

/// Teacher (quant == nullptr) or student forward pass.
ForwardResult forward(const ToyModel& model, const TokenBatch& batch, const StudentQuant* quant);

/// Student forward with every quantizer active.
ForwardResult forward_student(const ToyModel& model, const TokenBatch& batch, const StudentQuant& quant);

/// Mean cross-entropy over valid positions.
double cross_entropy(const MatrixD& logits, const TokenBatch& batch);
/// Fraction of valid positions whose argmax equals the label.
double token_accuracy(const MatrixD& logits, const TokenBatch& batch);

struct TrainerConfig {
  ModelShape model;
  std::size_t seq_len = 16;
  double noise = 0.02;

  double alpha_task = 0.10;
  double alpha_feature = 0.10;
  double alpha_logit = 2.0;
  std::size_t k = 3;         // LAFD layers
  std::size_t big_k = 16;    // EAKLD entropy cap, "K" in JSON
  double rho = 0.125;
  AllocationScheme scheme = AllocationScheme::kSuperGroup;
  std::size_t group_size = 32;
  double beta = 2.0;
  double epsilon = 1e-5;
  int activation_bits = 16;

  double lr = 2e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t steps = 500;
  std::size_t batch_size = 16;
  std::uint64_t seed = 42;

  double teacher_lr = 1e-2;
  std::size_t teacher_max_steps = 3000;
  double teacher_target_accuracy = 0.97;

  void validate() const;
  GroupQuantConfig quant_config() const { return {group_size, beta, epsilon}; }
  KldConfig kld_config() const { return {big_k}; }
};

nlohmann::ordered_json config_to_json(const TrainerConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainerConfig config_from_json(const nlohmann::json& j);

double total_loss(double task, double feature, double logit, const TrainerConfig& cfg);

struct Gradients {
  MatrixD embedding;
  std::vector<MatrixD> up;
  std::vector<MatrixD> down;
  std::vector<double> gain;
  MatrixD head;
};

struct StepMetrics {
  std::size_t step = 0;
  double task = 0.0;
  double feature = 0.0;
  double logit = 0.0;
  double total = 0.0;
  double lambda = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> selected_layers;
};

struct LossResult {
  StepMetrics metrics;
  Gradients grads;
};

/// Composite loss of `student` against `teacher` on one batch and its
/// gradient. With quant == nullptr the student runs unquantized (pass-through
/// mode). Layer selection and lambda come from the teacher alone.
LossResult distill_loss(const ToyModel& student, const ToyModel& teacher, const TokenBatch& batch,
                        const TrainerConfig& cfg, const StudentQuant* quant);

/// Cross-entropy of a model on a batch and its gradient (teacher pretraining).
LossResult task_loss(const ToyModel& model, const TokenBatch& batch);

class AdamW {
 public:
  AdamW(const ToyModel& like, double lr, double beta1, double beta2, double eps, double weight_decay);
  void step(ToyModel& model, const Gradients& g);
  std::size_t steps_taken() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_, wd_;
  std::size_t t_ = 0;
  Gradients m_;
  Gradients v_;
};

/// One distillation step. Throws InputError, leaving the student untouched,
/// if the loss is not finite.
StepMetrics train_step(ToyModel& student, const ToyModel& teacher, const TokenBatch& batch,
                       const TrainerConfig& cfg, const StudentQuant& quant, AdamW& opt);

struct TeacherResult {
  ToyModel model;
  std::size_t steps = 0;
  double accuracy = 0.0;
};

/// Fixed evaluation batch (64 sequences) derived from `seed`, disjoint from
/// the training streams.
TokenBatch heldout_batch(const CopyTask& task, std::uint64_t seed);

/// Trains a full-precision model on the task with cross-entropy until its
/// accuracy on a held-out batch reaches cfg.teacher_target_accuracy.
TeacherResult pretrain_teacher(const CopyTask& task, const TrainerConfig& cfg);

struct QadResult {
  ToyModel student;
  std::vector<StepMetrics> history;
};

QadResult run_qad(const ToyModel& teacher, const ToyModel& student_init, const CopyTask& task,
                  const TrainerConfig& cfg);

/// Header "step,task,feature,logit,total,lambda,accuracy,selected_layers";
/// selected layers are 1-based and separated by ';'.
std::string history_to_csv(const std::vector<StepMetrics>& history);

}  // namespace razorq
