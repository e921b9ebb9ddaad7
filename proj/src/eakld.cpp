// SPDX-License-Identifier: Apache-2.0

#include "razorq/eakld.hpp"

#include <cmath>
#include <map>

namespace razorq {

namespace {

const double kLogFloor = std::log(kProbFloor);

// Per-position weight 1 / (samples * valid positions in that sample), zero
// for masked positions. The weights of a batch sum to 1.
std::vector<double> position_weights(const LogitBatch& b) {
  std::map<std::size_t, std::size_t> per_sample;
  for (std::size_t t = 0; t < b.mask.size(); ++t)
    if (b.mask[t]) ++per_sample[b.sample_ids[t]];
  require(!per_sample.empty(), "mask has no valid positions");
  const auto samples = static_cast<double>(per_sample.size());
  std::vector<double> w(b.mask.size(), 0.0);
  for (std::size_t t = 0; t < b.mask.size(); ++t)
    if (b.mask[t]) w[t] = 1.0 / (samples * static_cast<double>(per_sample[b.sample_ids[t]]));
  return w;
}

void check_batch(const LogitBatch& b) {
  require(b.teacher.rows() == b.student.rows() && b.teacher.cols() == b.student.cols(),
          "teacher and student logits differ in shape");
  require(b.mask.size() == b.teacher.rows(), "mask length does not match the number of positions");
  require(b.sample_ids.size() == b.teacher.rows(), "sample ids missing; call validate() first");
}

std::vector<double> clamped_log_softmax(std::span<const double> z) {
  auto l = log_softmax(z);
  for (double& v : l) v = std::max(v, kLogFloor);
  return l;
}

// KL(P || Q) for one position, both given as logits.
double kl_row(std::span<const double> p_logits, std::span<const double> q_logits) {
  const auto p = softmax(p_logits);
  const auto lp = clamped_log_softmax(p_logits);
  const auto lq = clamped_log_softmax(q_logits);
  double kl = 0.0;
  for (std::size_t v = 0; v < p.size(); ++v) kl += p[v] * (lp[v] - lq[v]);
  return kl;
}

std::size_t argmax(std::span<const double> x) {
  return static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
}

}  // namespace

void LogitBatch::validate() {
  require(teacher.rows() == student.rows() && teacher.cols() == student.cols(),
          "teacher and student logits differ in shape");
  require(teacher.cols() >= 1, "vocabulary is empty");
  require(teacher.all_finite() && student.all_finite(), "logits must be finite");
  require(mask.size() == teacher.rows(), "mask length does not match the number of positions");
  if (sample_ids.empty()) sample_ids.assign(teacher.rows(), 0);
  require(sample_ids.size() == teacher.rows(), "sample id count does not match the number of positions");
  if (labels) {
    require(labels->size() == teacher.rows(), "label count does not match the number of positions");
    for (std::size_t t = 0; t < labels->size(); ++t)
      if (mask[t])
        require((*labels)[t] >= 0 && static_cast<std::size_t>((*labels)[t]) < teacher.cols(),
                "label outside the vocabulary");
  }
  require(std::any_of(mask.begin(), mask.end(), [](auto m) { return m != 0; }), "mask has no valid positions");
}

void KldConfig::validate() const { require(k >= 2, "entropy cap K must be at least 2"); }

std::vector<double> softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += out[i] = std::exp(logits[i] - m);
  for (double& v : out) v /= sum;
  return out;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), "softmax of an empty vector");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  const double log_sum = std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = (logits[i] - m) - log_sum;
  return out;
}

double token_entropy(std::span<const double> p) {
  require(!p.empty(), "entropy of an empty distribution");
  double sum = 0.0;
  for (double v : p) {
    require(std::isfinite(v) && v >= 0.0, "probabilities must be finite and nonnegative");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= 1e-6, "probabilities must sum to 1");
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return std::max(h, 0.0);
}

double mixing_lambda(const LogitBatch& batch, const KldConfig& cfg) {
  check_batch(batch);
  cfg.validate();
  const double cap = std::log(static_cast<double>(cfg.k));
  const auto w = position_weights(batch);
  double lambda = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (w[t] == 0.0) continue;
    const double h = token_entropy(softmax(batch.teacher.row(t)));
    lambda += w[t] * std::min(h, cap) / cap;
  }
  return std::clamp(lambda, 0.0, 1.0);
}

double forward_kld(const LogitBatch& batch) {
  check_batch(batch);
  const auto w = position_weights(batch);
  double f = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t)
    if (w[t] != 0.0) f += w[t] * kl_row(batch.teacher.row(t), batch.student.row(t));
  return f;
}

double reverse_kld(const LogitBatch& batch) {
  check_batch(batch);
  const auto w = position_weights(batch);
  double r = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t)
    if (w[t] != 0.0) r += w[t] * kl_row(batch.student.row(t), batch.teacher.row(t));
  return r;
}

double eakld_loss(const LogitBatch& batch, const KldConfig& cfg) {
  const double lambda = mixing_lambda(batch, cfg);
  return lambda * forward_kld(batch) + (1.0 - lambda) * reverse_kld(batch);
}

double cakld_coefficient(const LogitBatch& batch) {
  check_batch(batch);
  require(batch.labels.has_value(), "labels are required");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < batch.mask.size(); ++t) {
    if (!batch.mask[t]) continue;
    sum += softmax(batch.teacher.row(t))[static_cast<std::size_t>((*batch.labels)[t])];
    ++n;
  }
  require(n > 0, "mask has no valid positions");
  return sum / static_cast<double>(n);
}

double cakld_loss(const LogitBatch& batch) {
  const double c = cakld_coefficient(batch);
  return c * forward_kld(batch) + (1.0 - c) * reverse_kld(batch);
}

MismatchRate mismatch_rate(const LogitBatch& batch, double threshold) {
  check_batch(batch);
  require(batch.labels.has_value(), "labels are required");
  require(threshold > 0.0 && threshold < 1.0, "threshold must lie in (0, 1)");
  std::size_t valid = 0;
  std::size_t high = 0;
  std::size_t wrong = 0;
  for (std::size_t t = 0; t < batch.mask.size(); ++t) {
    if (!batch.mask[t]) continue;
    ++valid;
    const auto p = softmax(batch.teacher.row(t));
    const std::size_t top = argmax(p);
    if (p[top] <= threshold) continue;
    ++high;
    if (static_cast<std::int64_t>(top) != (*batch.labels)[t]) ++wrong;
  }
  require(valid > 0, "mask has no valid positions");
  MismatchRate r;
  r.high_conf_fraction = static_cast<double>(high) / static_cast<double>(valid);
  r.mismatch_fraction = high == 0 ? 0.0 : static_cast<double>(wrong) / static_cast<double>(high);
  return r;
}

MatrixD mixed_kld_grad(const LogitBatch& batch, double mix) {
  check_batch(batch);
  const auto w = position_weights(batch);
  MatrixD grad(batch.student.rows(), batch.student.cols());
  const std::size_t vocab = batch.student.cols();
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (w[t] == 0.0) continue;
    const auto p = softmax(batch.teacher.row(t));
    const auto lp = clamped_log_softmax(batch.teacher.row(t));
    const auto raw_lq = log_softmax(batch.student.row(t));
    const auto q = softmax(batch.student.row(t));

    // A clamped student log-probability is constant in the logits.
    std::vector<double> lq(vocab);
    std::vector<bool> live(vocab);
    double p_live = 0.0;
    double q_live = 0.0;
    double eq_g = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) {
      live[v] = raw_lq[v] > kLogFloor;
      lq[v] = live[v] ? raw_lq[v] : kLogFloor;
      if (live[v]) {
        p_live += p[v];
        q_live += q[v];
      }
      eq_g += q[v] * (lq[v] - lp[v]);
    }
    auto g = grad.row(t);
    for (std::size_t u = 0; u < vocab; ++u) {
      const double fwd = -(live[u] ? p[u] : 0.0) + q[u] * p_live;
      const double rev = q[u] * ((lq[u] - lp[u]) - eq_g) + (live[u] ? q[u] : 0.0) - q[u] * q_live;
      g[u] = w[t] * (mix * fwd + (1.0 - mix) * rev);
    }
  }
  return grad;
}

MatrixD eakld_grad(const LogitBatch& batch, const KldConfig& cfg) {
  return mixed_kld_grad(batch, mixing_lambda(batch, cfg));
}

}  // namespace razorq
