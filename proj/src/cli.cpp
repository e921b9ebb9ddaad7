// SPDX-License-Identifier: Apache-2.0

#include "razorq/cli.hpp"

#include <cstdio>
#include <fstream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "razorq/analysis.hpp"
#include "razorq/compression.hpp"
#include "razorq/eakld.hpp"
#include "razorq/lafd.hpp"
#include "razorq/layout.hpp"
#include "razorq/manifest.hpp"
#include "razorq/packing.hpp"
#include "razorq/quantizer.hpp"
#include "razorq/tensor_io.hpp"
#include "razorq/trainer.hpp"

namespace razorq::cli {

namespace {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;

void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void add_threads(CLI::App* sub, unsigned& threads) {
  sub->add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->default_val(1)
      ->check(CLI::Range(1u, 1024u));
}

void add_group_config(CLI::App* sub, GroupQuantConfig& cfg) {
  sub->add_option("--group", cfg.group_size, "Group size G")->default_val(256);
  sub->add_option("--beta", cfg.beta, "Ternary scaling coefficient")->default_val(2.0);
  sub->add_option("--eps", cfg.epsilon, "Scale floor")->default_val(1e-5);
}

ojson blob_summary(const PackedBlob& b) {
  std::size_t counts[3] = {0, 0, 0};
  for (BitMode m : b.lane_modes) ++counts[static_cast<int>(m)];
  ojson j;
  j["format"] = to_string(b.format);
  j["axis"] = b.axis == GroupAxis::kRows ? "rows" : "columns";
  j["rows"] = b.rows;
  j["cols"] = b.cols;
  j["group_size"] = b.group_size;
  j["beta"] = b.beta;
  j["epsilon"] = b.epsilon;
  j["modes_digest"] = hex64(b.modes_digest);
  j["ternary_lanes"] = counts[0];
  j["int4_lanes"] = counts[1];
  j["int8_lanes"] = counts[2];
  j["payload_bytes"] = b.payload.size();
  j["scale_count"] = b.scales.size();
  j["physical_bits_per_weight"] = b.physical_bits_per_weight();
  return j;
}

double mean_squared_error(const DenseMatrix& a, const DenseMatrix& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sum += d * d;
  }
  return a.size() == 0 ? 0.0 : sum / static_cast<double>(a.size());
}

std::vector<double> tensor_values(const fs::path& path, const char* what) {
  const Tensor t = read_tensor(path);
  std::vector<double> v(t.data.begin(), t.data.end());
  for (double x : v) require(std::isfinite(x), std::string(what) + " contains non-finite values");
  return v;
}

std::vector<std::int64_t> integer_values(const fs::path& path, const char* what) {
  std::vector<std::int64_t> out;
  for (double x : tensor_values(path, what)) {
    require(x == std::nearbyint(x), std::string(what) + " must hold integers");
    out.push_back(static_cast<std::int64_t>(x));
  }
  return out;
}

MatrixD to_double(const DenseMatrix& m) { return m.cast<double>(); }

// ---- quantize ---------------------------------------------------------------

struct QuantizeArgs {
  std::string in, out, scheme = "super", plan_out;
  double rho = 0.125;
  std::uint64_t seed = kDefaultSeed;
  bool activations = false;
  GroupQuantConfig cfg;
  unsigned threads = 1;
};

ojson run_quantize(const QuantizeArgs& a) {
  const DenseMatrix w = load_tensor_file(a.in);
  const std::string out = a.out.empty() ? fs::path(a.in).replace_extension(".rzq").string() : a.out;
  ojson j;
  j["command"] = "quantize";
  j["out"] = out;
  QuantizedGroupMatrix q;
  if (a.activations) {
    q = quantize_activations(w, a.cfg);
    j["mode"] = "activations";
  } else {
    const auto plan = build_plan(w.rows(), a.rho, parse_scheme(a.scheme), a.seed);
    q = quantize_matrix(w, plan, a.cfg, a.threads);
    j["mode"] = "weights";
    j["rho"] = a.rho;
    j["scheme"] = to_string(plan.scheme);
    j["four_bit_rows"] = plan.four_bit_count();
    j["effective_bitwidth"] = effective_bitwidth(plan);
    if (!a.plan_out.empty()) {
      write_text_atomic(a.plan_out, plan_to_json(plan).dump(2) + "\n");
      j["plan_out"] = a.plan_out;
    }
  }
  const PackedBlob blob = pack(q);
  write_blob(out, blob);
  j["blob"] = blob_summary(blob);
  j["mse"] = mean_squared_error(w, dequantize<float>(q));
  return j;
}

// ---- pack / unpack ----------------------------------------------------------

struct PackArgs {
  std::string codes, scales, out, mode, plan;
  GroupQuantConfig cfg;
  unsigned threads = 1;
};

ojson run_pack(const PackArgs& a) {
  const DenseMatrix codes_m = load_tensor_file(a.codes);
  const DenseMatrix scales_m = load_tensor_file(a.scales);
  require(a.mode.empty() != a.plan.empty(), "give exactly one of --mode and --plan");
  std::vector<BitMode> modes;
  if (!a.plan.empty()) {
    std::ifstream f(a.plan);
    require(f.good(), "cannot open plan file " + a.plan);
    nlohmann::json pj;
    try {
      f >> pj;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed plan JSON: ") + e.what());
    }
    modes = row_modes_for(plan_from_json(pj));
  } else {
    BitMode m;
    if (a.mode == "ternary")
      m = BitMode::kTernary;
    else if (a.mode == "int4")
      m = BitMode::kInt4;
    else if (a.mode == "int8")
      m = BitMode::kInt8;
    else
      throw InputError("unknown mode '" + a.mode + "' (expected ternary, int4 or int8)");
    modes.assign(codes_m.rows(), m);
  }
  std::vector<std::int8_t> codes;
  for (float c : codes_m.data()) {
    require(c == std::nearbyint(c) && std::abs(c) <= 127.0f, "codes must be integers in [-127, 127]");
    codes.push_back(static_cast<std::int8_t>(c));
  }
  std::vector<float> scales(scales_m.data().begin(), scales_m.data().end());
  const QuantizedGroupMatrix q(codes_m.rows(), codes_m.cols(), GroupAxis::kRows, a.cfg, modes, std::move(codes),
                               std::move(scales));
  const PackedBlob blob = pack(q);
  write_blob(a.out, blob);
  ojson j;
  j["command"] = "pack";
  j["out"] = a.out;
  j["blob"] = blob_summary(blob);
  return j;
}

struct UnpackArgs {
  std::string in, out, codes_out, scales_out;
  unsigned threads = 1;
};

ojson run_unpack(const UnpackArgs& a) {
  const PackedBlob blob = read_blob(a.in);
  const QuantizedGroupMatrix q = unpack(blob);
  ojson j;
  j["command"] = "unpack";
  j["blob"] = blob_summary(blob);
  save_tensor_file(a.out, dequantize<float>(q));
  j["out"] = a.out;
  if (!a.codes_out.empty()) {
    DenseMatrix c(q.rows(), q.cols());
    for (std::size_t r = 0; r < q.rows(); ++r)
      for (std::size_t col = 0; col < q.cols(); ++col) c(r, col) = q.code_at(r, col);
    save_tensor_file(a.codes_out, c);
    j["codes_out"] = a.codes_out;
  }
  if (!a.scales_out.empty()) {
    save_tensor_file(a.scales_out, DenseMatrix(q.lanes(), q.groups_per_lane(), q.scales()));
    j["scales_out"] = a.scales_out;
  }
  return j;
}

// ---- report-compression -----------------------------------------------------

struct ReportArgs {
  std::string manifest;
  CompressionPolicy policy;
  bool layers = false;
  unsigned threads = 1;
};

ojson run_report(const ReportArgs& a) {
  const auto report = compression_report(load_manifest(a.manifest), a.policy);
  ojson j;
  j["command"] = "report-compression";
  j["manifest"] = a.manifest;
  j["decoder_bits"] = a.policy.decoder_bitwidth;
  j["embedding_bits"] = a.policy.embedding_bitwidth;
  j["group_size"] = a.policy.group_size;
  ojson r = report_to_json(report);
  if (!a.layers) r.erase("layers");
  for (auto& [k, v] : r.items()) j[k] = v;
  return j;
}

// ---- analyze-alloc ----------------------------------------------------------

struct AllocArgs {
  std::size_t d_out = 0;
  double rho = 0.125;
  std::string scheme = "all", in, salience, sweep_csv;
  std::optional<double> e_low, e_high;
  std::uint64_t seed = kDefaultSeed;
  std::size_t sweep_seeds = 100;
  GroupQuantConfig cfg;
  unsigned threads = 1;
};

ojson run_alloc(const AllocArgs& a) {
  ojson j;
  j["command"] = "analyze-alloc";
  std::size_t d_out = a.d_out;
  std::vector<double> sal;
  std::string sal_source = "uniform";
  double e_low = 1.0;
  double e_high = 0.0;
  std::string err_source = "default";

  if (!a.in.empty()) {
    const DenseMatrix w = load_tensor_file(a.in);
    require(d_out == 0 || d_out == w.rows(), "--d-out does not match the rows of --in");
    d_out = w.rows();
    // Row salience: mean squared weight. Error levels: mean squared round-trip
    // error of the whole matrix quantized at each precision.
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (float v : w.row(r)) s += static_cast<double>(v) * v;
      sal.push_back(s / static_cast<double>(w.cols()));
    }
    sal_source = "weights";
    e_low = mean_squared_error(w, fake_quantize(w, uniform_plan(w.rows(), false), a.cfg));
    e_high = mean_squared_error(w, fake_quantize(w, uniform_plan(w.rows(), true), a.cfg));
    err_source = "measured";
  }
  if (!a.salience.empty()) {
    sal = tensor_values(a.salience, "salience");
    require(d_out == 0 || d_out == sal.size(), "salience length does not match d_out");
    d_out = sal.size();
    sal_source = "file";
  }
  require(d_out >= 1, "give --d-out, --in or --salience");
  if (sal.empty()) sal.assign(d_out, 1.0);
  if (a.e_low) e_low = *a.e_low;
  if (a.e_high) e_high = *a.e_high;
  if (a.e_low || a.e_high) err_source = "flags";
  const SalienceProfile profile(sal);

  j["d_out"] = d_out;
  j["rho"] = a.rho;
  j["seed"] = a.seed;
  j["salience"] = sal_source;
  j["error_levels"] = err_source;

  std::vector<AllocationScheme> schemes;
  if (a.scheme == "all")
    schemes = {AllocationScheme::kSuperGroup, AllocationScheme::kStacked, AllocationScheme::kRandom};
  else
    schemes = {parse_scheme(a.scheme)};
  ojson per = ojson::object();
  std::optional<double> d_super, d_stacked, d_random;
  for (auto s : schemes) {
    const auto plan = build_plan(d_out, a.rho, s, a.seed);
    const auto report = analyze_plan(plan, profile, e_low, e_high);
    per[to_string(s)] = report_to_json(report);
    if (s == AllocationScheme::kSuperGroup) d_super = report.discrepancy;
    if (s == AllocationScheme::kStacked) d_stacked = report.discrepancy;
    if (s == AllocationScheme::kRandom) d_random = report.discrepancy;
  }
  j["schemes"] = per;
  if (d_super && d_stacked && d_random) j["ordering_holds"] = *d_super < *d_random && *d_random < *d_stacked;

  if (!a.sweep_csv.empty()) {
    const auto sweep = discrepancy_sweep({0.5, 0.25, 0.125}, {64, 256, 1024}, a.seed, a.sweep_seeds);
    write_text_atomic(a.sweep_csv, sweep_to_csv(sweep));
    j["sweep_csv"] = a.sweep_csv;
    j["sweep_rows"] = sweep.size();
  }
  return j;
}

// ---- analyze-layers ---------------------------------------------------------

struct LayersArgs {
  std::vector<std::string> stacks, masks;
  std::size_t k = 3;
  std::string csv_out;
  unsigned threads = 1;
};

FeatureStack load_stack(const fs::path& path, const std::string& mask_path) {
  const Tensor t = read_tensor(path);
  require(t.shape.size() == 3, "feature stack " + path.string() + " must be a rank-3 tensor (layers, positions, d)");
  const std::size_t layers = t.shape[0], positions = t.shape[1], d = t.shape[2];
  std::vector<MatrixD> mats;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto* base = t.data.data() + l * positions * d;
    mats.emplace_back(positions, d, std::vector<double>(base, base + positions * d));
  }
  std::vector<std::uint8_t> mask(positions, 1);
  if (!mask_path.empty()) {
    const auto m = integer_values(mask_path, "mask");
    require(m.size() == positions, "mask length does not match the stack positions");
    for (std::size_t i = 0; i < m.size(); ++i) mask[i] = m[i] != 0;
  }
  return FeatureStack(std::move(mats), std::move(mask));
}

ojson run_layers(const LayersArgs& a) {
  require(a.masks.empty() || a.masks.size() == a.stacks.size(), "give one --mask per --stack or none");
  std::vector<FeatureStack> stacks;
  for (std::size_t i = 0; i < a.stacks.size(); ++i)
    stacks.push_back(load_stack(a.stacks[i], a.masks.empty() ? "" : a.masks[i]));
  const auto counts = layer_frequency_analysis(stacks, a.k);
  ojson j;
  j["command"] = "analyze-layers";
  j["stacks"] = stacks.size();
  j["layers"] = counts.size();
  j["k"] = a.k;
  j["counts"] = counts;
  ojson scores = ojson::array();
  for (const auto& s : stacks) scores.push_back(layer_cosine_scores(s));
  j["scores"] = scores;
  if (!a.csv_out.empty()) {
    std::string csv = "layer,count\n";
    for (std::size_t l = 0; l < counts.size(); ++l)
      csv += std::to_string(l + 1) + "," + std::to_string(counts[l]) + "\n";
    write_text_atomic(a.csv_out, csv);
    j["csv_out"] = a.csv_out;
  }
  return j;
}

// ---- analyze-kld ------------------------------------------------------------

struct KldArgs {
  std::string teacher, student, labels, mask, samples, csv_out;
  std::size_t big_k = 16;
  std::vector<double> thresholds = {0.6, 0.7, 0.8, 0.9, 0.95};
  unsigned threads = 1;
};

ojson run_kld(const KldArgs& a) {
  LogitBatch b;
  b.teacher = to_double(load_tensor_file(a.teacher));
  b.student = to_double(load_tensor_file(a.student));
  const std::size_t n = b.teacher.rows();
  b.mask.assign(n, 1);
  if (!a.mask.empty()) {
    const auto m = integer_values(a.mask, "mask");
    require(m.size() == n, "mask length does not match the logits");
    for (std::size_t i = 0; i < n; ++i) b.mask[i] = m[i] != 0;
  }
  if (!a.labels.empty()) b.labels = integer_values(a.labels, "labels");
  if (!a.samples.empty()) {
    for (auto id : integer_values(a.samples, "sample ids")) {
      require(id >= 0, "sample ids must be nonnegative");
      b.sample_ids.push_back(static_cast<std::size_t>(id));
    }
  }
  b.validate();
  const KldConfig cfg{a.big_k};
  ojson j;
  j["command"] = "analyze-kld";
  j["positions"] = n;
  j["vocab"] = b.teacher.cols();
  j["K"] = a.big_k;
  const double lambda = mixing_lambda(b, cfg);
  const double f = forward_kld(b);
  const double r = reverse_kld(b);
  j["lambda"] = lambda;
  j["forward_kld"] = f;
  j["reverse_kld"] = r;
  j["eakld"] = lambda * f + (1.0 - lambda) * r;
  if (b.labels) {
    const double c = cakld_coefficient(b);
    j["cakld_coefficient"] = c;
    j["cakld"] = c * f + (1.0 - c) * r;
    ojson rows = ojson::array();
    std::string csv = "threshold,high_conf_fraction,mismatch_fraction\n";
    char buf[128];
    for (double t : a.thresholds) {
      const auto m = mismatch_rate(b, t);
      rows.push_back({{"threshold", t},
                      {"high_conf_fraction", m.high_conf_fraction},
                      {"mismatch_fraction", m.mismatch_fraction}});
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", t, m.high_conf_fraction, m.mismatch_fraction);
      csv += buf;
    }
    j["mismatch"] = rows;
    if (!a.csv_out.empty()) {
      write_text_atomic(a.csv_out, csv);
      j["csv_out"] = a.csv_out;
    }
  } else {
    require(a.csv_out.empty(), "--csv-out needs --labels");
  }
  return j;
}

// ---- distill-demo -----------------------------------------------------------

struct DemoArgs {
  std::string config, history_out, config_out;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  std::optional<double> rho;
  std::optional<std::string> scheme;
  unsigned threads = 1;
};

ojson run_demo(const DemoArgs& a) {
  TrainerConfig cfg;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    require(f.good(), "cannot open config file " + a.config);
    nlohmann::json cj;
    try {
      f >> cj;
    } catch (const nlohmann::json::exception& e) {
      throw InputError(std::string("malformed trainer config: ") + e.what());
    }
    cfg = config_from_json(cj);
  }
  if (a.steps) cfg.steps = *a.steps;
  cfg.seed = a.seed.value_or(cfg.seed);
  if (a.rho) cfg.rho = *a.rho;
  if (a.scheme) cfg.scheme = parse_scheme(*a.scheme);
  cfg.validate();

  const CopyTask task(cfg.model.vocab, cfg.seq_len, cfg.noise, cfg.seed);
  const TeacherResult teacher = pretrain_teacher(task, cfg);
  const ToyModel frozen = teacher.model;
  const TokenBatch eval = heldout_batch(task, cfg.seed);
  const StudentQuant quant =
      StudentQuant::build(cfg.model, cfg.rho, cfg.scheme, cfg.seed, cfg.quant_config(), cfg.activation_bits);
  const double before = cross_entropy(forward_student(teacher.model, eval, quant).logits, eval);
  const QadResult qad = run_qad(teacher.model, teacher.model, task, cfg);
  ensure(teacher.model == frozen, "teacher weights changed during distillation");
  const auto final_out = forward_student(qad.student, eval, quant);
  const double after = cross_entropy(final_out.logits, eval);

  ojson j;
  j["command"] = "distill-demo";
  j["config"] = config_to_json(cfg);
  j["teacher"] = {{"steps", teacher.steps}, {"accuracy", teacher.accuracy}};
  j["student"] = {{"eval_task_loss_step0", before},
                  {"eval_task_loss_final", after},
                  {"loss_ratio", after / before},
                  {"eval_accuracy_final", token_accuracy(final_out.logits, eval)}};
  j["steps"] = qad.history.size();
  if (!a.history_out.empty()) {
    write_text_atomic(a.history_out, history_to_csv(qad.history));
    j["history_out"] = a.history_out;
  }
  if (!a.config_out.empty()) {
    write_text_atomic(a.config_out, config_to_json(cfg).dump(2) + "\n");
    j["config_out"] = a.config_out;
  }
  return j;
}

// ---- inspect ----------------------------------------------------------------

ojson run_inspect(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  const auto starts_with = [&](std::string_view magic) {
    return bytes.size() >= magic.size() && std::equal(magic.begin(), magic.end(), bytes.begin());
  };
  ojson j;
  j["command"] = "inspect";
  j["file"] = path;
  j["bytes"] = bytes.size();
  if (starts_with(kTensorMagic)) {
    const Tensor t = decode_tensor(bytes);
    j["kind"] = "tensor";
    j["shape"] = t.shape;
    if (!t.data.empty()) {
      double lo = t.data.front(), hi = t.data.front(), sum = 0.0;
      for (float v : t.data) {
        lo = std::min<double>(lo, v);
        hi = std::max<double>(hi, v);
        sum += v;
      }
      j["min"] = lo;
      j["max"] = hi;
      j["mean"] = sum / static_cast<double>(t.data.size());
    }
  } else if (starts_with(kPackedMagic)) {
    j["kind"] = "packed";
    j["blob"] = blob_summary(parse_blob(bytes));
  } else {
    throw InputError(path + " is neither a tensor file nor a packed blob");
  }
  return j;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mixed-precision ternary/4-bit quantization toolkit", "razorq"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "razorq 1.0.0");

  QuantizeArgs qa;
  auto* quantize = app.add_subcommand("quantize", "Quantize a weight (or activation) matrix into a packed blob");
  quantize->add_option("--in", qa.in, "Input tensor file (rank 2)")->required();
  quantize->add_option("--out", qa.out, "Output blob (default: input path with .rzq)");
  quantize->add_option("--rho", qa.rho, "Fraction of 4-bit rows")->default_val(0.125);
  quantize->add_option("--scheme", qa.scheme, "super, stacked or random")->default_val("super");
  quantize->add_option("--seed", qa.seed, "Seed for random plans")->default_val(kDefaultSeed);
  quantize->add_option("--plan-out", qa.plan_out, "Also write the allocation plan as JSON");
  quantize->add_flag("--activations", qa.activations, "Int8 activation quantization, groups down each column");
  add_group_config(quantize, qa.cfg);
  add_threads(quantize, qa.threads);

  PackArgs pa;
  auto* packc = app.add_subcommand("pack", "Pack integer codes and scales into a blob");
  packc->add_option("--codes", pa.codes, "Tensor of integer codes (rows x cols)")->required();
  packc->add_option("--scales", pa.scales, "Tensor of scales (rows x groups)")->required();
  packc->add_option("--out", pa.out, "Output blob")->required();
  packc->add_option("--mode", pa.mode, "ternary, int4 or int8 for every row");
  packc->add_option("--plan", pa.plan, "Allocation plan JSON giving per-row modes");
  add_group_config(packc, pa.cfg);
  add_threads(packc, pa.threads);

  UnpackArgs ua;
  auto* unpackc = app.add_subcommand("unpack", "Dequantize a blob back to a tensor file");
  unpackc->add_option("--in", ua.in, "Input blob")->required();
  unpackc->add_option("--out", ua.out, "Output tensor (dequantized values)")->required();
  unpackc->add_option("--codes-out", ua.codes_out, "Also write the integer codes");
  unpackc->add_option("--scales-out", ua.scales_out, "Also write the scales (lanes x groups)");
  add_threads(unpackc, ua.threads);

  ReportArgs ra;
  auto* report = app.add_subcommand("report-compression", "Storage accounting for a model manifest");
  report->add_option("--manifest", ra.manifest, "Manifest JSON")->required();
  report->add_option("--decoder-bits", ra.policy.decoder_bitwidth, "Effective decoder bit-width")->default_val(1.58);
  report->add_option("--emb-bits", ra.policy.embedding_bitwidth, "Embedding / lm_head bit-width")->default_val(4.0);
  report->add_option("--group", ra.policy.group_size, "Group size")->default_val(256);
  report->add_flag("--layers", ra.layers, "Include the per-layer table");
  add_threads(report, ra.threads);

  AllocArgs aa;
  auto* alloc = app.add_subcommand("analyze-alloc", "Discrepancy, alignment and bound analysis of allocation plans");
  alloc->add_option("--d-out", aa.d_out, "Number of rows");
  alloc->add_option("--rho", aa.rho, "Fraction of 4-bit rows")->default_val(0.125);
  alloc->add_option("--scheme", aa.scheme, "super, stacked, random or all")->default_val("all");
  alloc->add_option("--seed", aa.seed, "Seed for random plans (first seed of the sweep)")->default_val(kDefaultSeed);
  alloc->add_option("--in", aa.in, "Weight tensor: salience and error levels are measured from it");
  alloc->add_option("--salience", aa.salience, "Salience tensor (d_out values)");
  alloc->add_option("--e-low", aa.e_low, "Error level of ternary rows");
  alloc->add_option("--e-high", aa.e_high, "Error level of 4-bit rows");
  alloc->add_option("--sweep-csv", aa.sweep_csv, "Write a discrepancy sweep over rho x d_out x scheme");
  alloc->add_option("--sweep-seeds", aa.sweep_seeds, "Random seeds per sweep cell")->default_val(100);
  add_group_config(alloc, aa.cfg);
  add_threads(alloc, aa.threads);

  LayersArgs la;
  auto* layers = app.add_subcommand("analyze-layers", "Histogram of the lowest-similarity layers over feature stacks");
  layers->add_option("--stack", la.stacks, "Rank-3 feature tensor (layers, positions, d); repeatable")->required();
  layers->add_option("--mask", la.masks, "Position mask tensor per stack; repeatable");
  layers->add_option("--k", la.k, "Layers selected per stack")->default_val(3);
  layers->add_option("--csv-out", la.csv_out, "Write the histogram as CSV");
  add_threads(layers, la.threads);

  KldArgs ka;
  auto* kld = app.add_subcommand("analyze-kld", "Entropy-aware KL statistics of teacher/student logits");
  kld->add_option("--teacher", ka.teacher, "Teacher logits (positions x vocab)")->required();
  kld->add_option("--student", ka.student, "Student logits (positions x vocab)")->required();
  kld->add_option("--labels", ka.labels, "Label token ids (positions)");
  kld->add_option("--mask", ka.mask, "Position mask (positions)");
  kld->add_option("--samples", ka.samples, "Sample id per position");
  kld->add_option("--K", ka.big_k, "Entropy cap K")->default_val(16);
  kld->add_option("--thresholds", ka.thresholds, "Confidence thresholds for the mismatch table")
      ->default_str("0.6 0.7 0.8 0.9 0.95");
  kld->add_option("--csv-out", ka.csv_out, "Write the mismatch table as CSV");
  add_threads(kld, ka.threads);

  DemoArgs da;
  auto* demo = app.add_subcommand("distill-demo", "Pretrain a toy teacher and distill a low-bit student");
  demo->add_option("--config", da.config, "Trainer config JSON");
  demo->add_option("--steps", da.steps, "Override the number of distillation steps");
  demo->add_option("--seed", da.seed, "Override the seed (default 42)");
  demo->add_option("--rho", da.rho, "Override rho");
  demo->add_option("--scheme", da.scheme, "Override the allocation scheme");
  demo->add_option("--history-out", da.history_out, "Write the per-step metric history as CSV");
  demo->add_option("--config-out", da.config_out, "Write the resolved config as JSON");
  add_threads(demo, da.threads);

  std::string inspect_in;
  unsigned inspect_threads = 1;
  auto* inspect = app.add_subcommand("inspect", "Describe a tensor file or packed blob");
  inspect->add_option("--in", inspect_in, "File to describe")->required();
  add_threads(inspect, inspect_threads);

  std::vector<std::string> storage{"razorq"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "razorq: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    ojson result;
    if (quantize->parsed())
      result = run_quantize(qa);
    else if (packc->parsed())
      result = run_pack(pa);
    else if (unpackc->parsed())
      result = run_unpack(ua);
    else if (report->parsed())
      result = run_report(ra);
    else if (alloc->parsed())
      result = run_alloc(aa);
    else if (layers->parsed())
      result = run_layers(la);
    else if (kld->parsed())
      result = run_kld(ka);
    else if (demo->parsed())
      result = run_demo(da);
    else if (inspect->parsed())
      result = run_inspect(inspect_in);
    else
      throw InvariantError("no subcommand selected");
    out << result.dump(2) << "\n";
    return kExitOk;
  } catch (const InputError& e) {
    err << "razorq: error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "razorq: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace razorq::cli
