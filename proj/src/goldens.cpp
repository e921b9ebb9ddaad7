// SPDX-License-Identifier: Apache-2.0

#include "razorq/goldens.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "json.hpp"
#include "razorq/analysis.hpp"
#include "razorq/compression.hpp"
#include "razorq/half.hpp"
#include "razorq/layout.hpp"
#include "razorq/quantizer.hpp"
#include "razorq/rng.hpp"
#include "razorq/tensor_io.hpp"
#include "razorq/trainer.hpp"

namespace razorq {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

constexpr const char* kRegenerate = "razorq-goldens regenerate --fixtures <dir>";

// A golden case produces the file content (`golden`) and the freshly computed
// values to compare against the file's "expected" block (`actual`). Cases
// anchored to published numbers keep those numbers as "expected"; the rest
// store what they compute.
struct CaseOutput {
  ojson golden;
  ojson actual;
};

ojson header(const std::string& name, ojson inputs, double tolerance) {
  ojson j;
  j["name"] = name;
  j["regenerate"] = kRegenerate;
  j["inputs"] = std::move(inputs);
  j["tolerance"] = tolerance;
  return j;
}

std::string key_of(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

fs::path manifest_path(const fs::path& dir, const std::string& name) { return dir / "manifests" / (name + ".json"); }

// ---- effective bit-width ----------------------------------------------------

CaseOutput effective_bitwidth_case(const fs::path&) {
  constexpr std::size_t kRows = 256;
  const std::vector<std::pair<double, double>> table = {{1.0, 4.00}, {0.5, 2.79}, {0.125, 1.88}, {0.0, 1.58}};
  CaseOutput c;
  c.golden = header("effective_bitwidth", {{"d_out", kRows}, {"scheme", "super"}, {"rounding", "two decimals"}}, 0.005);
  for (const auto& [rho, bits] : table) {
    const double bw = effective_bitwidth(build_plan(kRows, rho, AllocationScheme::kSuperGroup));
    c.golden["expected"][key_of(rho)] = bits;
    c.actual[key_of(rho)] = std::round(bw * 100.0) / 100.0;
  }
  return c;
}

// ---- compression ------------------------------------------------------------

CaseOutput compression_case(const fs::path& dir, const std::string& name, const std::string& manifest,
                            std::size_t group, const std::vector<std::pair<double, double>>& table) {
  const ModelManifest m = load_manifest(manifest_path(dir, manifest));
  CaseOutput c;
  c.golden = header(name,
                    {{"manifest", "manifests/" + manifest + ".json"},
                     {"group_size", group},
                     {"embedding_bits", 4},
                     {"accounting", "nominal"}},
                    0.01);
  for (const auto& [bits, ratio] : table) {
    const auto r = compression_report(m, {bits, 4.0, group});
    c.golden["expected"]["ratio"][key_of(bits)] = ratio;
    c.actual["ratio"][key_of(bits)] = r.compression_ratio_nominal;
  }
  const auto r = compression_report(m, {kTernaryBits, 4.0, group});
  c.golden["expected"]["proportion_in_range"] = true;
  c.actual["proportion_in_range"] = r.quantization_proportion >= 99.9 && r.quantization_proportion < 100.0;
  c.golden["expected"]["total_params"] = m.total_params();
  c.actual["total_params"] = m.total_params();
  return c;
}

// ---- quantizer vectors ------------------------------------------------------

ojson codes_json(std::span<const std::int8_t> codes) {
  ojson a = ojson::array();
  for (auto v : codes) a.push_back(static_cast<int>(v));
  return a;
}

CaseOutput quantizer_case(const fs::path&) {
  CaseOutput c;
  const GroupQuantConfig g4{4, 2.0, 1e-5};
  c.golden = header("quantizer_vectors", {{"group_size", 4}, {"beta", 2.0}, {"epsilon", 1e-5}}, 0.0);

  struct Vector {
    const char* name;
    std::vector<float> values;
    BitMode mode;
    std::vector<int> codes;
    double scale;
  };
  const double eps_scale = [] {
    double h = half::round(1e-5);
    while (h < 1e-5) h = half::next_up(h);
    return h;
  }();
  const std::vector<Vector> hand = {
      {"ternary_hand", {1.2f, -2.0f, 0.1f, 0.7f}, BitMode::kTernary, {1, -1, 0, 0}, 2.0},
      {"int4_hand", {7.0f, -3.5f, 0.0f, 1.75f}, BitMode::kInt4, {7, -4, 0, 2}, 1.0},
      {"int8_hand", {0.5f, -1.0f, 0.25f, 1.0f}, BitMode::kInt8, {64, -127, 32, 127}, half::round(1.0 / 127.0)},
      {"ternary_zero", {0.0f, 0.0f, 0.0f, 0.0f}, BitMode::kTernary, {0, 0, 0, 0}, eps_scale},
  };
  for (const auto& v : hand) {
    const auto q = quantize_group(std::span<const float>(v.values), v.mode, g4);
    c.golden["expected"][v.name] = {{"codes", v.codes}, {"scale", v.scale}};
    c.actual[v.name] = {{"codes", codes_json(q.codes)}, {"scale", static_cast<double>(q.scale)}};
  }

  // Seeded 5 x 10 matrix, one Int4 row per five (row 0), tail group of 2.
  SeededRng rng(42);
  DenseMatrix w(5, 10);
  for (float& x : w.data()) x = static_cast<float>(rng.normal());
  const auto q = quantize_matrix(w, build_plan(5, 0.2, AllocationScheme::kSuperGroup), g4);
  ojson scales = ojson::array();
  for (float s : q.scales()) scales.push_back(static_cast<double>(s));
  c.actual["seeded_5x10"] = {{"codes", codes_json(q.codes())}, {"scales", scales}};
  c.golden["expected"]["seeded_5x10"] = c.actual["seeded_5x10"];
  c.golden["inputs"]["seeded_5x10"] = "SeededRng(42).normal(), row-major, rho 0.2 super-group";
  return c;
}

// ---- discrepancy sweep ------------------------------------------------------

CaseOutput discrepancy_case(const fs::path&) {
  constexpr std::uint64_t kSeed0 = 42;
  constexpr std::size_t kSeeds = 100;
  CaseOutput c;
  c.golden = header("discrepancy_sweep",
                    {{"d_out", {64, 256, 1024}}, {"rho", {0.5, 0.25, 0.125}}, {"random_seeds", "42..141"}}, 1e-12);
  for (std::size_t d : {64u, 256u, 1024u}) {
    for (double rho : {0.5, 0.25, 0.125}) {
      const auto super = star_discrepancy(allocation_points(build_plan(d, rho, AllocationScheme::kSuperGroup)));
      const auto stacked = star_discrepancy(allocation_points(build_plan(d, rho, AllocationScheme::kStacked)));
      std::vector<double> scaled;
      std::size_t n = 0;
      for (std::size_t s = 0; s < kSeeds; ++s) {
        const auto plan = build_plan(d, rho, AllocationScheme::kRandom, kSeed0 + s);
        n = plan.four_bit_count();
        scaled.push_back(star_discrepancy(allocation_points(plan)) * std::sqrt(static_cast<double>(n)));
      }
      std::sort(scaled.begin(), scaled.end());
      const double median = 0.5 * (scaled[kSeeds / 2 - 1] + scaled[kSeeds / 2]);
      c.actual[std::to_string(d) + "/" + key_of(rho)] = {
          {"n", n}, {"super", super}, {"stacked", stacked}, {"random_median_scaled", median}};
    }
  }
  c.golden["expected"] = c.actual;
  return c;
}

// ---- trainer baseline -------------------------------------------------------

CaseOutput trainer_case(const fs::path&) {
  TrainerConfig cfg;
  cfg.steps = 60;
  CaseOutput c;
  c.golden = header("trainer_baseline", {{"config", config_to_json(cfg)}}, 1e-6);
  const CopyTask task(cfg.model.vocab, cfg.seq_len, cfg.noise, cfg.seed);
  const auto teacher = pretrain_teacher(task, cfg);
  const auto qad = run_qad(teacher.model, teacher.model, task, cfg);
  c.actual["teacher_steps"] = teacher.steps;
  c.actual["teacher_accuracy"] = teacher.accuracy;
  for (std::size_t s : {0u, 20u, 40u, 59u}) {
    const auto& m = qad.history[s];
    c.actual["step_" + std::to_string(s)] = {{"task", m.task},       {"feature", m.feature},
                                             {"logit", m.logit},     {"total", m.total},
                                             {"lambda", m.lambda},   {"selected_layers", m.selected_layers}};
  }
  c.golden["expected"] = c.actual;
  return c;
}

using CaseFn = std::function<CaseOutput(const fs::path&)>;

std::vector<std::pair<std::string, CaseFn>> cases() {
  return {
      {"effective_bitwidth", effective_bitwidth_case},
      {"compression_qwen3_0p6b",
       [](const fs::path& d) {
         return compression_case(d, "compression_qwen3_0p6b", "qwen3_0p6b", 256,
                                 {{4.0, 3.94}, {2.79, 5.05}, {1.88, 6.41}, {1.58, 7.04}});
       }},
      {"compression_mobilellm_350m",
       [](const fs::path& d) {
         return compression_case(d, "compression_mobilellm_350m", "mobilellm_350m", 64, {{4.0, 3.76}});
       }},
      {"quantizer_vectors", quantizer_case},
      {"discrepancy_sweep", discrepancy_case},
      {"trainer_baseline", trainer_case},
  };
}

void write_json(const fs::path& path, const ojson& j) {
  fs::create_directories(path.parent_path());
  const std::string text = j.dump(2) + "\n";
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream f(path);
  require(f.good(), "cannot open " + path.string());
  try {
    return nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void compare(const std::string& path, const nlohmann::json& expected, const nlohmann::json& actual, double tol,
             std::vector<std::string>& out) {
  if (expected.is_number() && actual.is_number() && !(expected.is_boolean() || actual.is_boolean())) {
    const double e = expected.get<double>();
    const double a = actual.get<double>();
    if (!(std::abs(e - a) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << path << ": expected " << e << ", got " << a;
      out.push_back(s.str());
    }
    return;
  }
  if (expected.type() != actual.type()) {
    out.push_back(path + ": expected " + expected.dump() + ", got " + actual.dump());
    return;
  }
  if (expected.is_object()) {
    for (const auto& [k, v] : expected.items()) {
      if (!actual.contains(k))
        out.push_back(path + "/" + k + ": missing");
      else
        compare(path + "/" + k, v, actual.at(k), tol, out);
    }
    for (const auto& [k, v] : actual.items())
      if (!expected.contains(k)) out.push_back(path + "/" + k + ": not in golden");
    return;
  }
  if (expected.is_array()) {
    if (expected.size() != actual.size()) {
      out.push_back(path + ": expected " + std::to_string(expected.size()) + " entries, got " +
                    std::to_string(actual.size()));
      return;
    }
    for (std::size_t i = 0; i < expected.size(); ++i)
      compare(path + "/" + std::to_string(i), expected[i], actual[i], tol, out);
    return;
  }
  if (expected != actual) out.push_back(path + ": expected " + expected.dump() + ", got " + actual.dump());
}

}  // namespace

TransformerShape qwen3_0p6b_shape() {
  // hidden_size 1024, 28 layers, 16 query / 8 key-value heads of dim 128,
  // intermediate_size 3072, vocab 151936, tied embeddings, per-head q/k norms.
  return {28, 1024, 16, 8, 128, 3072, 151936, true, true};
}

TransformerShape mobilellm_350m_shape() {
  // dim 960, 32 layers, 15 query / 5 key-value heads of dim 64,
  // hidden_dim 2560, vocab 32000, shared input/output embedding.
  return {32, 960, 15, 5, 64, 2560, 32000, true, false};
}

ModelManifest manifest_from_shape(const TransformerShape& s) {
  ModelManifest m;
  m.tied_embedding = s.tied_embedding;
  const std::uint64_t q_dim = s.heads * s.head_dim;
  const std::uint64_t kv_dim = s.kv_heads * s.head_dim;
  const auto add = [&](std::string name, std::uint64_t d_out, std::uint64_t d_in, LayerRole role) {
    m.layers.push_back({std::move(name), d_out, d_in, role, role != LayerRole::kNorm});
  };
  add("model.embed_tokens", s.vocab, s.hidden, LayerRole::kEmbedding);
  for (std::size_t i = 0; i < s.layers; ++i) {
    const std::string p = "model.layers." + std::to_string(i) + ".";
    add(p + "input_layernorm", s.hidden, 1, LayerRole::kNorm);
    add(p + "self_attn.q_proj", q_dim, s.hidden, LayerRole::kDecoder);
    add(p + "self_attn.k_proj", kv_dim, s.hidden, LayerRole::kDecoder);
    add(p + "self_attn.v_proj", kv_dim, s.hidden, LayerRole::kDecoder);
    add(p + "self_attn.o_proj", s.hidden, q_dim, LayerRole::kDecoder);
    if (s.qk_norm) {
      add(p + "self_attn.q_norm", s.head_dim, 1, LayerRole::kNorm);
      add(p + "self_attn.k_norm", s.head_dim, 1, LayerRole::kNorm);
    }
    add(p + "post_attention_layernorm", s.hidden, 1, LayerRole::kNorm);
    add(p + "mlp.gate_proj", s.intermediate, s.hidden, LayerRole::kDecoder);
    add(p + "mlp.up_proj", s.intermediate, s.hidden, LayerRole::kDecoder);
    add(p + "mlp.down_proj", s.hidden, s.intermediate, LayerRole::kDecoder);
  }
  add("model.norm", s.hidden, 1, LayerRole::kNorm);
  add("lm_head", s.vocab, s.hidden, LayerRole::kLmHead);
  m.validate();
  return m;
}

std::vector<std::string> golden_case_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : cases()) names.push_back(name);
  return names;
}

void regenerate_goldens(const fs::path& dir) {
  write_json(manifest_path(dir, "qwen3_0p6b"), manifest_to_json(manifest_from_shape(qwen3_0p6b_shape())));
  write_json(manifest_path(dir, "mobilellm_350m"), manifest_to_json(manifest_from_shape(mobilellm_350m_shape())));
  for (const auto& [name, fn] : cases()) write_json(dir / "goldens" / (name + ".json"), fn(dir).golden);
}

std::vector<GoldenResult> verify_goldens(const fs::path& dir) {
  std::vector<GoldenResult> results;
  for (const auto& [name, fn] : cases()) {
    GoldenResult r;
    r.name = name;
    try {
      const auto file = read_json(dir / "goldens" / (name + ".json"));
      const CaseOutput c = fn(dir);
      const nlohmann::json golden = nlohmann::json::parse(c.golden.dump());
      compare("inputs", file.at("inputs"), golden.at("inputs"), 0.0, r.mismatches);
      compare("expected", file.at("expected"), nlohmann::json::parse(c.actual.dump()),
              file.at("tolerance").get<double>(), r.mismatches);
    } catch (const std::exception& e) {
      r.mismatches.push_back(std::string("error: ") + e.what());
    }
    r.passed = r.mismatches.empty();
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace razorq
