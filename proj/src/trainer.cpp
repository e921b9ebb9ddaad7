// SPDX-License-Identifier: Apache-2.0

#include "razorq/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

namespace razorq {

namespace {

// Independent streams derived from the one user seed.
constexpr std::uint64_t kPlanStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kDataStream = 0xD1B54A32D192ED03ULL;
constexpr std::uint64_t kEvalStream = 0x8CB92BA72F3D8DD7ULL;
constexpr std::uint64_t kTeacherDataStream = 0xA0761D6478BD642FULL;
constexpr std::size_t kEvalSequences = 64;
constexpr std::size_t kTeacherEvalEvery = 50;

MatrixD gaussian(std::size_t rows, std::size_t cols, double stddev, SeededRng& rng) {
  MatrixD m(rows, cols);
  for (double& v : m.data()) v = stddev * rng.normal();
  return m;
}

MatrixD fake_quant_tokens(const MatrixD& x, const GroupQuantConfig& config) {
  const std::vector<BitMode> modes(x.rows(), BitMode::kInt8);
  return dequantize<double>(quantize_rows(x, std::span<const BitMode>(modes), config));
}

struct BlockCache {
  MatrixD x_in;  // input to the up projection, after activation quantization
  MatrixD u;     // pre-activation
  MatrixD a;     // tanh(g u)
  MatrixD a_in;  // input to the down projection, after activation quantization
  MatrixD up;    // weights as used
  MatrixD down;
};

struct Trace {
  ForwardResult out;
  std::vector<BlockCache> blocks;
  MatrixD embedding;
  MatrixD head;
};

Trace run_forward(const ToyModel& model, const TokenBatch& batch, const StudentQuant* quant) {
  const auto& shape = model.shape;
  for (auto tok : batch.tokens)
    require(tok >= 0 && static_cast<std::size_t>(tok) < shape.vocab,
            "token id " + std::to_string(tok) + " is outside the vocabulary");
  if (quant) {
    require(quant->up_plans.size() == shape.layers && quant->down_plans.size() == shape.layers,
            "quantization plans do not match the model depth");
    check_activation_bits(quant->activation_bits);
  }
  const bool act8 = quant && quant->activation_bits == 8;
  const auto act = [&](const MatrixD& x) { return act8 ? fake_quant_tokens(x, quant->config) : x; };

  Trace tr;
  tr.embedding = quant ? fake_quantize(model.embedding, uniform_plan(shape.vocab, true), quant->config)
                       : model.embedding;
  tr.head = quant ? fake_quantize(model.head, uniform_plan(shape.vocab, true), quant->config) : model.head;

  MatrixD h(batch.positions(), shape.d_model);
  for (std::size_t t = 0; t < batch.positions(); ++t) {
    const auto src = tr.embedding.row(static_cast<std::size_t>(batch.tokens[t]));
    std::copy(src.begin(), src.end(), h.row(t).begin());
  }
  tr.out.features.push_back(h);

  for (std::size_t l = 0; l < shape.layers; ++l) {
    const Block& blk = model.blocks[l];
    BlockCache c;
    c.up = quant ? fake_quantize(blk.up, quant->up_plans[l], quant->config) : blk.up;
    c.down = quant ? fake_quantize(blk.down, quant->down_plans[l], quant->config) : blk.down;
    c.x_in = act(h);
    c.u = matmul_nt(c.x_in, c.up);
    c.a = MatrixD(c.u.rows(), c.u.cols());
    for (std::size_t i = 0; i < c.u.size(); ++i) c.a.data()[i] = std::tanh(blk.gain * c.u.data()[i]);
    c.a_in = act(c.a);
    const MatrixD delta = matmul_nt(c.a_in, c.down);
    for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] += delta.data()[i];
    tr.out.features.push_back(h);
    tr.blocks.push_back(std::move(c));
  }
  tr.out.logits = matmul_nt(h, tr.head);
  return tr;
}

Gradients zeros_like(const ToyModel& m) {
  Gradients g;
  g.embedding = MatrixD(m.embedding.rows(), m.embedding.cols());
  g.head = MatrixD(m.head.rows(), m.head.cols());
  for (const auto& b : m.blocks) {
    g.up.emplace_back(b.up.rows(), b.up.cols());
    g.down.emplace_back(b.down.rows(), b.down.cols());
    g.gain.push_back(0.0);
  }
  return g;
}

void add_into(MatrixD& dst, const MatrixD& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

// Reverse pass. dlogits is d(loss)/d(logits); dfeat, if non-empty, holds an
// extra gradient for each feature matrix.
Gradients run_backward(const ToyModel& model, const TokenBatch& batch, const Trace& tr, const MatrixD& dlogits,
                       const std::vector<MatrixD>& dfeat) {
  Gradients g = zeros_like(model);
  const std::size_t layers = model.shape.layers;
  g.head = matmul_tn(dlogits, tr.out.features[layers]);
  MatrixD dh = matmul(dlogits, tr.head);
  if (!dfeat.empty()) add_into(dh, dfeat[layers]);

  for (std::size_t l = layers; l-- > 0;) {
    const BlockCache& c = tr.blocks[l];
    const double gain = model.blocks[l].gain;
    g.down[l] = matmul_tn(dh, c.a_in);
    const MatrixD da = matmul(dh, c.down);
    MatrixD du(da.rows(), da.cols());
    double dgain = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
      const double a = c.a.data()[i];
      const double dpre = da.data()[i] * (1.0 - a * a);
      dgain += dpre * c.u.data()[i];
      du.data()[i] = dpre * gain;
    }
    g.gain[l] = dgain;
    g.up[l] = matmul_tn(du, c.x_in);
    add_into(dh, matmul(du, c.up));
    if (!dfeat.empty()) add_into(dh, dfeat[l]);
  }
  for (std::size_t t = 0; t < batch.positions(); ++t) {
    auto dst = g.embedding.row(static_cast<std::size_t>(batch.tokens[t]));
    const auto src = dh.row(t);
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return g;
}

std::size_t valid_count(const TokenBatch& batch) {
  const auto n = static_cast<std::size_t>(std::count_if(batch.mask.begin(), batch.mask.end(),
                                                        [](auto m) { return m != 0; }));
  require(n > 0, "batch has no valid positions");
  return n;
}

MatrixD cross_entropy_grad(const MatrixD& logits, const TokenBatch& batch) {
  const double inv = 1.0 / static_cast<double>(valid_count(batch));
  MatrixD g(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    if (!batch.mask[t]) continue;
    const auto p = softmax(logits.row(t));
    auto row = g.row(t);
    for (std::size_t v = 0; v < p.size(); ++v) row[v] = p[v] * inv;
    row[static_cast<std::size_t>(batch.labels[t])] -= inv;
  }
  return g;
}

LogitBatch logit_batch(const MatrixD& teacher, const MatrixD& student, const TokenBatch& batch) {
  LogitBatch lb{teacher, student, batch.labels, batch.mask, batch.sample_ids};
  lb.validate();
  return lb;
}

void adam_update(std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v,
                 double lr, double b1, double b2, double eps, double wd, std::size_t t) {
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps) + wd * p[i];
    p[i] -= lr * update;
  }
}

void check_positive_size(std::size_t v, const char* name) {
  require(v >= 1, std::string(name) + " must be at least 1");
}

}  // namespace

void ModelShape::validate() const {
  check_positive_size(vocab, "vocab");
  check_positive_size(d_model, "d_model");
  check_positive_size(d_hidden, "d_hidden");
  check_positive_size(layers, "layers");
}

ToyModel ToyModel::init(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  SeededRng rng(seed);
  ToyModel m;
  m.shape = shape;
  m.embedding = gaussian(shape.vocab, shape.d_model, 1.0, rng);
  for (std::size_t l = 0; l < shape.layers; ++l) {
    Block b;
    b.up = gaussian(shape.d_hidden, shape.d_model, 1.0 / std::sqrt(static_cast<double>(shape.d_model)), rng);
    b.down = gaussian(shape.d_model, shape.d_hidden, 1.0 / std::sqrt(static_cast<double>(shape.d_hidden)), rng);
    m.blocks.push_back(std::move(b));
  }
  m.head = gaussian(shape.vocab, shape.d_model, 1.0 / std::sqrt(static_cast<double>(shape.d_model)), rng);
  return m;
}

bool ToyModel::all_finite() const {
  if (!embedding.all_finite() || !head.all_finite()) return false;
  return std::all_of(blocks.begin(), blocks.end(), [](const Block& b) {
    return b.up.all_finite() && b.down.all_finite() && std::isfinite(b.gain);
  });
}

StudentQuant StudentQuant::build(const ModelShape& shape, double rho, AllocationScheme scheme, std::uint64_t seed,
                                 const GroupQuantConfig& config, int activation_bits) {
  shape.validate();
  config.validate();
  check_activation_bits(activation_bits);
  StudentQuant q;
  q.config = config;
  q.activation_bits = activation_bits;
  SeededRng seeds(seed ^ kPlanStream);
  for (std::size_t l = 0; l < shape.layers; ++l) {
    q.up_plans.push_back(build_plan(shape.d_hidden, rho, scheme, seeds.next()));
    q.down_plans.push_back(build_plan(shape.d_model, rho, scheme, seeds.next()));
  }
  return q;
}

CopyTask::CopyTask(std::size_t vocab, std::size_t seq_len, double noise, std::uint64_t seed)
    : vocab_(vocab), seq_len_(seq_len), noise_(noise), perm_(vocab) {
  require(vocab >= 2, "copy task needs a vocabulary of at least 2");
  require(seq_len >= 2, "copy task needs sequences of at least 2 tokens");
  require(noise >= 0.0 && noise <= 1.0, "noise must lie in [0, 1]");
  SeededRng rng(seed);
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  for (std::size_t i = vocab - 1; i > 0; --i) std::swap(perm_[i], perm_[rng.below(i + 1)]);
}

TokenBatch CopyTask::sample(std::size_t sequences, SeededRng& rng) const {
  require(sequences >= 1, "batch needs at least one sequence");
  TokenBatch b;
  b.sequences = sequences;
  b.seq_len = seq_len_;
  for (std::size_t s = 0; s < sequences; ++s) {
    std::size_t prev = rng.below(vocab_);
    b.tokens.push_back(static_cast<std::int64_t>(prev));
    b.labels.push_back(0);
    b.mask.push_back(0);
    b.sample_ids.push_back(s);
    for (std::size_t t = 1; t < seq_len_; ++t) {
      const bool noisy = rng.uniform01() < noise_;
      const std::size_t cur = noisy ? rng.below(vocab_) : perm_[prev];
      b.tokens.push_back(static_cast<std::int64_t>(cur));
      b.labels.push_back(static_cast<std::int64_t>(prev));
      b.mask.push_back(1);
      b.sample_ids.push_back(s);
      prev = cur;
    }
  }
  return b;
}

ForwardResult forward(const ToyModel& model, const TokenBatch& batch, const StudentQuant* quant) {
  return run_forward(model, batch, quant).out;
}

ForwardResult forward_student(const ToyModel& model, const TokenBatch& batch, const StudentQuant& quant) {
  return forward(model, batch, &quant);
}

double cross_entropy(const MatrixD& logits, const TokenBatch& batch) {
  require(logits.rows() == batch.positions(), "logits do not match the batch");
  double sum = 0.0;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    if (!batch.mask[t]) continue;
    sum -= log_softmax(logits.row(t))[static_cast<std::size_t>(batch.labels[t])];
  }
  return sum / static_cast<double>(valid_count(batch));
}

double token_accuracy(const MatrixD& logits, const TokenBatch& batch) {
  require(logits.rows() == batch.positions(), "logits do not match the batch");
  std::size_t hit = 0;
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    if (!batch.mask[t]) continue;
    const auto row = logits.row(t);
    const auto top = static_cast<std::int64_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (top == batch.labels[t]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(valid_count(batch));
}

void TrainerConfig::validate() const {
  model.validate();
  require(seq_len >= 2, "seq_len must be at least 2");
  require(noise >= 0.0 && noise <= 1.0, "noise must lie in [0, 1]");
  for (double a : {alpha_task, alpha_feature, alpha_logit})
    require(std::isfinite(a) && a >= 0.0, "loss weights must be finite and nonnegative");
  require(k >= 1 && k <= model.layers, "k must lie in [1, layers]");
  require(big_k >= 2, "K must be at least 2");
  require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
  quant_config().validate();
  check_activation_bits(activation_bits);
  require(std::isfinite(lr) && lr >= 0.0, "lr must be finite and nonnegative");
  require(std::isfinite(weight_decay) && weight_decay >= 0.0, "weight_decay must be finite and nonnegative");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  check_positive_size(batch_size, "batch_size");
  require(std::isfinite(teacher_lr) && teacher_lr > 0.0, "teacher lr must be positive");
  require(teacher_target_accuracy > 0.0 && teacher_target_accuracy <= 1.0,
          "teacher target accuracy must lie in (0, 1]");
}

nlohmann::ordered_json config_to_json(const TrainerConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = {{"vocab", c.model.vocab},
                {"d_model", c.model.d_model},
                {"d_hidden", c.model.d_hidden},
                {"layers", c.model.layers}};
  j["seq_len"] = c.seq_len;
  j["noise"] = c.noise;
  j["alpha_task"] = c.alpha_task;
  j["alpha_feature"] = c.alpha_feature;
  j["alpha_logit"] = c.alpha_logit;
  j["k"] = c.k;
  j["K"] = c.big_k;
  j["rho"] = c.rho;
  j["scheme"] = to_string(c.scheme);
  j["group_size"] = c.group_size;
  j["beta"] = c.beta;
  j["epsilon"] = c.epsilon;
  j["activation_bits"] = c.activation_bits;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["betas"] = {c.beta1, c.beta2};
  j["adam_eps"] = c.adam_eps;
  j["steps"] = c.steps;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["teacher"] = {{"lr", c.teacher_lr},
                  {"max_steps", c.teacher_max_steps},
                  {"target_accuracy", c.teacher_target_accuracy}};
  return j;
}

TrainerConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "trainer config must be a JSON object");
  TrainerConfig c;
  try {
    const auto take = [](const nlohmann::json& obj, const char* key, auto& field) {
      if (obj.contains(key)) field = obj.at(key).get<std::decay_t<decltype(field)>>();
    };
    for (const auto& [key, value] : j.items()) {
      static const std::vector<std::string> known = {
          "model", "seq_len", "noise", "alpha_task", "alpha_feature", "alpha_logit", "k", "K", "rho", "scheme",
          "group_size", "beta", "epsilon", "activation_bits", "lr", "weight_decay", "betas", "adam_eps", "steps",
          "batch_size", "seed", "teacher"};
      require(std::find(known.begin(), known.end(), key) != known.end(), "unknown trainer config key '" + key + "'");
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      for (const auto& [key, value] : m.items())
        require(key == "vocab" || key == "d_model" || key == "d_hidden" || key == "layers",
                "unknown model config key '" + key + "'");
      take(m, "vocab", c.model.vocab);
      take(m, "d_model", c.model.d_model);
      take(m, "d_hidden", c.model.d_hidden);
      take(m, "layers", c.model.layers);
    }
    take(j, "seq_len", c.seq_len);
    take(j, "noise", c.noise);
    take(j, "alpha_task", c.alpha_task);
    take(j, "alpha_feature", c.alpha_feature);
    take(j, "alpha_logit", c.alpha_logit);
    take(j, "k", c.k);
    take(j, "K", c.big_k);
    take(j, "rho", c.rho);
    if (j.contains("scheme")) c.scheme = parse_scheme(j.at("scheme").get<std::string>());
    take(j, "group_size", c.group_size);
    take(j, "beta", c.beta);
    take(j, "epsilon", c.epsilon);
    take(j, "activation_bits", c.activation_bits);
    take(j, "lr", c.lr);
    take(j, "weight_decay", c.weight_decay);
    if (j.contains("betas")) {
      const auto b = j.at("betas").get<std::vector<double>>();
      require(b.size() == 2, "betas must hold two values");
      c.beta1 = b[0];
      c.beta2 = b[1];
    }
    take(j, "adam_eps", c.adam_eps);
    take(j, "steps", c.steps);
    take(j, "batch_size", c.batch_size);
    take(j, "seed", c.seed);
    if (j.contains("teacher")) {
      const auto& t = j.at("teacher");
      for (const auto& [key, value] : t.items())
        require(key == "lr" || key == "max_steps" || key == "target_accuracy",
                "unknown teacher config key '" + key + "'");
      take(t, "lr", c.teacher_lr);
      take(t, "max_steps", c.teacher_max_steps);
      take(t, "target_accuracy", c.teacher_target_accuracy);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed trainer config: ") + e.what());
  }
  c.validate();
  return c;
}

double total_loss(double task, double feature, double logit, const TrainerConfig& cfg) {
  return cfg.alpha_task * task + cfg.alpha_feature * feature + cfg.alpha_logit * logit;
}

LossResult distill_loss(const ToyModel& student, const ToyModel& teacher, const TokenBatch& batch,
                        const TrainerConfig& cfg, const StudentQuant* quant) {
  require(student.shape == teacher.shape, "student and teacher shapes differ");
  require(cfg.k <= student.shape.layers, "k exceeds the number of layers");
  const Trace t = run_forward(teacher, batch, nullptr);
  const Trace s = run_forward(student, batch, quant);

  const FeatureStack tf(t.out.features, batch.mask);
  const FeatureStack sf(s.out.features, batch.mask);
  const auto selected = select_layers(layer_cosine_scores(tf), cfg.k);
  const LogitBatch lb = logit_batch(t.out.logits, s.out.logits, batch);
  const double lambda = mixing_lambda(lb, cfg.kld_config());

  LossResult r;
  auto& m = r.metrics;
  m.task = cross_entropy(s.out.logits, batch);
  m.feature = adaptive_feature_loss(tf, sf, selected);
  m.logit = lambda * forward_kld(lb) + (1.0 - lambda) * reverse_kld(lb);
  m.total = total_loss(m.task, m.feature, m.logit, cfg);
  m.lambda = lambda;
  m.accuracy = token_accuracy(s.out.logits, batch);
  m.selected_layers = selected;

  MatrixD dlogits = cross_entropy_grad(s.out.logits, batch);
  for (double& v : dlogits.data()) v *= cfg.alpha_task;
  const MatrixD dkl = mixed_kld_grad(lb, lambda);
  for (std::size_t i = 0; i < dlogits.size(); ++i) dlogits.data()[i] += cfg.alpha_logit * dkl.data()[i];
  auto dfeat = adaptive_feature_grad(tf, sf, selected);
  for (auto& f : dfeat)
    for (double& v : f.data()) v *= cfg.alpha_feature;
  r.grads = run_backward(student, batch, s, dlogits, dfeat);
  return r;
}

LossResult task_loss(const ToyModel& model, const TokenBatch& batch) {
  const Trace t = run_forward(model, batch, nullptr);
  LossResult r;
  r.metrics.task = cross_entropy(t.out.logits, batch);
  r.metrics.total = r.metrics.task;
  r.metrics.accuracy = token_accuracy(t.out.logits, batch);
  r.grads = run_backward(model, batch, t, cross_entropy_grad(t.out.logits, batch), {});
  return r;
}

AdamW::AdamW(const ToyModel& like, double lr, double beta1, double beta2, double eps, double weight_decay)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay), m_(zeros_like(like)), v_(zeros_like(like)) {}

void AdamW::step(ToyModel& model, const Gradients& g) {
  ++t_;
  const auto upd = [&](std::span<double> p, std::span<const double> grad, std::span<double> m, std::span<double> v,
                       double wd) { adam_update(p, grad, m, v, lr_, beta1_, beta2_, eps_, wd, t_); };
  upd(model.embedding.data(), g.embedding.data(), m_.embedding.data(), v_.embedding.data(), wd_);
  for (std::size_t l = 0; l < model.blocks.size(); ++l) {
    auto& b = model.blocks[l];
    upd(b.up.data(), g.up[l].data(), m_.up[l].data(), v_.up[l].data(), wd_);
    upd(b.down.data(), g.down[l].data(), m_.down[l].data(), v_.down[l].data(), wd_);
    upd(std::span(&b.gain, 1), std::span(&g.gain[l], 1), std::span(&m_.gain[l], 1), std::span(&v_.gain[l], 1), 0.0);
  }
  upd(model.head.data(), g.head.data(), m_.head.data(), v_.head.data(), wd_);
}

StepMetrics train_step(ToyModel& student, const ToyModel& teacher, const TokenBatch& batch,
                       const TrainerConfig& cfg, const StudentQuant& quant, AdamW& opt) {
  LossResult r = distill_loss(student, teacher, batch, cfg, &quant);
  const auto& m = r.metrics;
  if (!std::isfinite(m.total) || !std::isfinite(m.task) || !std::isfinite(m.feature) || !std::isfinite(m.logit))
    throw InputError("non-finite loss at step " + std::to_string(opt.steps_taken()) + "; step aborted");
  opt.step(student, r.grads);
  r.metrics.step = opt.steps_taken() - 1;
  return r.metrics;
}

TokenBatch heldout_batch(const CopyTask& task, std::uint64_t seed) {
  SeededRng rng(seed ^ kEvalStream);
  return task.sample(kEvalSequences, rng);
}

TeacherResult pretrain_teacher(const CopyTask& task, const TrainerConfig& cfg) {
  cfg.validate();
  TeacherResult res;
  res.model = ToyModel::init(cfg.model, cfg.seed);
  AdamW opt(res.model, cfg.teacher_lr, cfg.beta1, cfg.beta2, cfg.adam_eps, 0.0);
  SeededRng data(cfg.seed ^ kTeacherDataStream);
  const TokenBatch eval = heldout_batch(task, cfg.seed);
  for (std::size_t step = 0; step < cfg.teacher_max_steps; ++step) {
    if (step % kTeacherEvalEvery == 0) {
      res.accuracy = token_accuracy(forward(res.model, eval, nullptr).logits, eval);
      if (res.accuracy >= cfg.teacher_target_accuracy) break;
    }
    const auto r = task_loss(res.model, task.sample(cfg.batch_size, data));
    require(std::isfinite(r.metrics.task), "teacher pretraining diverged");
    opt.step(res.model, r.grads);
    res.steps = step + 1;
  }
  res.accuracy = token_accuracy(forward(res.model, eval, nullptr).logits, eval);
  return res;
}

QadResult run_qad(const ToyModel& teacher, const ToyModel& student_init, const CopyTask& task,
                  const TrainerConfig& cfg) {
  cfg.validate();
  require(teacher.shape == cfg.model && student_init.shape == cfg.model, "model shapes do not match the config");
  QadResult res{student_init, {}};
  const StudentQuant quant =
      StudentQuant::build(cfg.model, cfg.rho, cfg.scheme, cfg.seed, cfg.quant_config(), cfg.activation_bits);
  AdamW opt(res.student, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay);
  SeededRng data(cfg.seed ^ kDataStream);
  for (std::size_t step = 0; step < cfg.steps; ++step)
    res.history.push_back(train_step(res.student, teacher, task.sample(cfg.batch_size, data), cfg, quant, opt));
  return res;
}

std::string history_to_csv(const std::vector<StepMetrics>& history) {
  std::string csv = "step,task,feature,logit,total,lambda,accuracy,selected_layers\n";
  char buf[256];
  for (const auto& m : history) {
    std::string sel;
    for (std::size_t i = 0; i < m.selected_layers.size(); ++i)
      sel += (i ? ";" : "") + std::to_string(m.selected_layers[i]);
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,", m.step, m.task, m.feature, m.logit,
                  m.total, m.lambda, m.accuracy);
    csv += buf;
    csv += sel;
    csv += '\n';
  }
  return csv;
}

}  // namespace razorq
