// SPDX-License-Identifier: Apache-2.0

#include "razorq/lafd.hpp"

#include <numeric>

namespace razorq {

FeatureStack::FeatureStack(std::vector<MatrixD> layers, std::vector<std::uint8_t> mask)
    : layers_(std::move(layers)), mask_(std::move(mask)) {
  require(layers_.size() >= 2, "a feature stack needs the embedding output and at least one block");
  const std::size_t t = layers_.front().rows();
  const std::size_t d = layers_.front().cols();
  require(d >= 1, "feature width must be at least 1");
  for (const auto& f : layers_) {
    require(f.rows() == t && f.cols() == d, "all layers of a feature stack must share one shape");
    require(f.all_finite(), "features must be finite");
  }
  require(mask_.size() == t, "mask length does not match the number of positions");
  valid_ = static_cast<std::size_t>(std::count_if(mask_.begin(), mask_.end(), [](auto m) { return m != 0; }));
  require(valid_ >= 1, "mask has no valid positions");
}

double cosine(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "cosine of vectors with different lengths");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> layer_cosine_scores(const FeatureStack& teacher) {
  std::vector<double> scores(teacher.blocks());
  for (std::size_t l = 1; l <= teacher.blocks(); ++l) {
    double sum = 0.0;
    for (std::size_t t = 0; t < teacher.positions(); ++t)
      if (teacher.valid(t)) sum += cosine(teacher.layer(l).row(t), teacher.layer(l - 1).row(t));
    scores[l - 1] = sum / static_cast<double>(teacher.valid_count());
  }
  return scores;
}

std::vector<std::size_t> select_layers(std::span<const double> scores, std::size_t k) {
  require(k >= 1 && k <= scores.size(), "k must lie in [1, " + std::to_string(scores.size()) + "]");
  for (double s : scores) require(!std::isnan(s), "layer scores must not be NaN");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(picked.begin(), picked.end());
  for (auto& l : picked) ++l;
  return picked;
}

namespace {

void check_pair(const FeatureStack& teacher, const FeatureStack& student, std::span<const std::size_t> selected) {
  require(teacher.blocks() == student.blocks() && teacher.positions() == student.positions() &&
              teacher.width() == student.width(),
          "teacher and student feature stacks differ in shape");
  require(teacher.mask() == student.mask(), "teacher and student masks differ");
  require(!selected.empty(), "no layers selected");
  for (std::size_t l : selected)
    require(l >= 1 && l <= teacher.blocks(), "selected layer " + std::to_string(l) + " is out of range");
}

}  // namespace

double adaptive_feature_loss(const FeatureStack& teacher, const FeatureStack& student,
                             std::span<const std::size_t> selected) {
  check_pair(teacher, student, selected);
  const double norm = static_cast<double>(teacher.valid_count()) * static_cast<double>(teacher.width());
  double total = 0.0;
  for (std::size_t l : selected) {
    double sq = 0.0;
    for (std::size_t t = 0; t < teacher.positions(); ++t) {
      if (!teacher.valid(t)) continue;
      const auto a = teacher.layer(l).row(t);
      const auto b = student.layer(l).row(t);
      for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    }
    total += sq / norm;
  }
  return total / static_cast<double>(selected.size());
}

std::vector<MatrixD> adaptive_feature_grad(const FeatureStack& teacher, const FeatureStack& student,
                                           std::span<const std::size_t> selected) {
  check_pair(teacher, student, selected);
  std::vector<MatrixD> grads;
  for (std::size_t l = 0; l <= teacher.blocks(); ++l) grads.emplace_back(teacher.positions(), teacher.width());
  const double coef = 2.0 / (static_cast<double>(selected.size()) * static_cast<double>(teacher.valid_count()) *
                             static_cast<double>(teacher.width()));
  for (std::size_t l : selected) {
    for (std::size_t t = 0; t < teacher.positions(); ++t) {
      if (!teacher.valid(t)) continue;
      const auto a = teacher.layer(l).row(t);
      const auto b = student.layer(l).row(t);
      auto g = grads[l].row(t);
      for (std::size_t i = 0; i < a.size(); ++i) g[i] += coef * (b[i] - a[i]);
    }
  }
  return grads;
}

std::vector<std::size_t> layer_frequency_analysis(std::span<const FeatureStack> stacks, std::size_t k) {
  require(!stacks.empty(), "no feature stacks given");
  const std::size_t blocks = stacks.front().blocks();
  std::vector<std::size_t> counts(blocks, 0);
  for (const auto& s : stacks) {
    require(s.blocks() == blocks, "feature stacks disagree on the number of layers");
    const auto scores = layer_cosine_scores(s);
    for (std::size_t l : select_layers(scores, k)) ++counts[l - 1];
  }
  return counts;
}

}  // namespace razorq
