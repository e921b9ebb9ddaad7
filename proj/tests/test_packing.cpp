// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "doctest.h"
#include "helpers.hpp"
#include "razorq/compression.hpp"
#include "razorq/goldens.hpp"
#include "razorq/half.hpp"
#include "razorq/packing.hpp"

using namespace razorq;

namespace {

std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put(std::vector<std::uint8_t>& b, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& b, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put(b, u, 8);
}

QuantizedGroupMatrix random_quantized(std::size_t rows, std::size_t cols, std::size_t group, SeededRng& rng,
                                      bool mixed_modes = true) {
  const auto w = test::random_matrix(rows, cols, rng);
  std::vector<BitMode> modes(rows);
  for (auto& m : modes) m = mixed_modes ? static_cast<BitMode>(rng.below(3)) : BitMode::kTernary;
  return quantize_rows(w, std::span<const BitMode>(modes), GroupQuantConfig{group, 2.0, 1e-5});
}

}  // namespace

TEST_CASE("trit and nibble examples") {
  CHECK(pack_trits(std::vector<std::int8_t>{1, -1, 0, 0, 1}) == 200);
  CHECK(pack_trits(std::vector<std::int8_t>{0, 0, 0, 0, 0}) == 121);
  CHECK(pack_trits(std::vector<std::int8_t>{1, 1, 1, 1, 1}) == 242);
  CHECK(pack_trits(std::vector<std::int8_t>{-1, -1, -1, -1, -1}) == 0);
  CHECK(pack_nibbles(7, -4) == 0x4F);
  CHECK_THROWS_AS(pack_trits(std::vector<std::int8_t>{2}), InputError);
  CHECK_THROWS_AS(pack_nibbles(8, 0), InputError);
}

TEST_CASE("closed-form lane sizes") {
  for (std::size_t n = 1; n < 40; ++n) {
    CHECK(packed_lane_bytes(BitMode::kTernary, n) == (n + 4) / 5);
    CHECK(packed_lane_bytes(BitMode::kInt4, n) == (n + 1) / 2);
    CHECK(packed_lane_bytes(BitMode::kInt8, n) == n);
  }
}

TEST_CASE("blob bytes match the documented layout") {
  const QuantizedGroupMatrix q(1, 5, GroupAxis::kRows, GroupQuantConfig{5, 2.0, 1e-5}, {BitMode::kTernary},
                               {1, -1, 0, 0, 1}, {2.0f});
  const PackedBlob b = pack(q);
  CHECK(b.format == PackFormat::kTernaryPack);
  CHECK(b.payload == std::vector<std::uint8_t>{200});
  CHECK(b.scales == std::vector<std::uint16_t>{0x4000});

  std::vector<std::uint8_t> expect = {'R', 'Z', 'R', 'Q', 'P', 'A', 'K', 'D'};
  put(expect, 1, 4);  // version
  put(expect, 0, 1);  // format
  put(expect, 0, 1);  // axis
  put(expect, 0, 2);
  put(expect, 1, 8);  // rows
  put(expect, 5, 8);  // cols
  put(expect, 5, 4);  // group
  put(expect, 0, 4);
  put_f64(expect, 2.0);
  put_f64(expect, 1e-5);
  put(expect, fnv1a({0}), 8);
  put(expect, 0, 1);    // lane mode
  put(expect, 1, 8);    // payload length
  put(expect, 200, 1);  // payload
  put(expect, 1, 8);    // scale count
  put(expect, 0x4000, 2);
  CHECK(serialize_blob(b) == expect);
  CHECK(parse_blob(expect) == b);
  CHECK(unpack(parse_blob(expect)) == q);
}

TEST_CASE("decoding examples") {
  const QuantizedGroupMatrix q(1, 5, GroupAxis::kRows, GroupQuantConfig{5, 2.0, 1e-5}, {BitMode::kTernary},
                               {0, 0, 0, 0, 0}, {1.0f});
  PackedBlob b = pack(q);
  b.payload = {200};
  const auto u = unpack(b);
  CHECK(std::vector<int>(u.codes().begin(), u.codes().end()) == std::vector<int>{1, -1, 0, 0, 1});
  b.payload = {243};
  CHECK_THROWS_AS(unpack(b), InputError);
  b.payload = {};
  CHECK_THROWS_AS(unpack(b), InputError);
}

TEST_CASE("int4 and int8 lanes") {
  const GroupQuantConfig cfg{4, 2.0, 1e-5};
  const QuantizedGroupMatrix q(2, 3, GroupAxis::kRows, cfg, {BitMode::kInt4, BitMode::kInt8}, {7, -4, 1, -127, 5, 127},
                               {1.0f, 0.5f});
  const auto b = pack(q);
  CHECK(b.format == PackFormat::kMixed);
  // row 0: 0x4F, then code 1 -> 9 with a zero padding nibble; row 1: raw bytes
  CHECK(b.payload == std::vector<std::uint8_t>{0x4F, 0x09, 0x81, 0x05, 0x7F});
  CHECK(unpack(b) == q);

  auto bad = b;
  bad.payload[1] = 0x19;  // nonzero padding nibble
  CHECK_THROWS_AS(unpack(bad), InputError);
  bad = b;
  bad.payload[2] = 0x80;  // -128
  CHECK_THROWS_AS(unpack(bad), InputError);
  bad = b;
  bad.payload[0] = 0x40;  // code nibble 0
  CHECK_THROWS_AS(unpack(bad), InputError);
}

TEST_CASE("round trips across modes and tail shapes") {
  SeededRng rng(21);
  for (std::size_t rows : {1u, 2u, 7u}) {
    for (std::size_t cols : {1u, 4u, 5u, 6u, 11u, 33u}) {
      for (std::size_t group : {1u, 3u, 4u, 8u, 64u}) {
        const auto q = random_quantized(rows, cols, group, rng);
        const auto b = pack(q);
        CHECK(unpack(b) == q);
        const auto bytes = serialize_blob(b);
        CHECK(parse_blob(bytes) == b);
        CHECK(serialize_blob(parse_blob(bytes)) == bytes);
        std::size_t payload = 0;
        for (std::size_t r = 0; r < rows; ++r) payload += packed_lane_bytes(q.lane_mode(r), cols);
        CHECK(b.payload.size() == payload);
      }
    }
  }
  // activation blobs keep their column axis
  const auto act = quantize_activations(test::random_matrix(9, 4, rng), GroupQuantConfig{4, 2.0, 1e-5});
  CHECK(unpack(parse_blob(serialize_blob(pack(act)))) == act);
  CHECK(pack(act).format == PackFormat::kBytePack);
}

TEST_CASE("parse rejects damaged blobs") {
  SeededRng rng(22);
  const auto bytes = serialize_blob(pack(random_quantized(3, 10, 4, rng)));
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    CHECK_THROWS_AS(parse_blob(truncated), InputError);
  }
  auto extra = bytes;
  extra.push_back(0);
  CHECK_THROWS_AS(parse_blob(extra), InputError);
  auto magic = bytes;
  magic[3] = 'X';
  CHECK_THROWS_AS(parse_blob(magic), InputError);
  auto version = bytes;
  version[8] = 2;
  CHECK_THROWS_AS(parse_blob(version), InputError);
  auto digest = bytes;
  digest[60] ^= 1;
  CHECK_THROWS_AS(parse_blob(digest), InputError);
  auto mode = bytes;
  mode[64] = 3;
  CHECK_THROWS_AS(parse_blob(mode), InputError);
}

TEST_CASE("blob files") {
  test::TempDir dir;
  SeededRng rng(23);
  const auto b = pack(random_quantized(4, 12, 4, rng));
  write_blob(dir / "w.rzq", b);
  CHECK(read_blob(dir / "w.rzq") == b);
  CHECK(test::slurp(dir / "w.rzq") == serialize_blob(b));
  CHECK(!std::filesystem::exists(dir / "w.rzq.tmp"));
}

TEST_CASE("physical bits per weight") {
  SeededRng rng(24);
  for (std::size_t cols : {250u, 256u, 1000u}) {
    const std::size_t g = 64;
    const auto t = pack(random_quantized(8, cols, g, rng, false));
    const double groups = std::ceil(static_cast<double>(cols) / g);
    const double scale_bits = 16.0 * groups / static_cast<double>(cols);
    CHECK(t.physical_bits_per_weight() == doctest::Approx(8.0 * std::ceil(cols / 5.0) / cols + scale_bits));
    CHECK(std::abs(t.physical_bits_per_weight() - (1.6 + 16.0 / g)) < 8.0 / cols + 16.0 / cols);

    const auto w = test::random_matrix(8, cols, rng);
    const auto n = pack(quantize_matrix(w, build_plan(8, 1.0, AllocationScheme::kStacked), GroupQuantConfig{g, 2, 1e-5}));
    CHECK(std::abs(n.physical_bits_per_weight() - (4.0 + 16.0 / g)) < 8.0 / cols + 16.0 / cols);
  }
}

// ---- compression accounting ---------------------------------------------

TEST_CASE("single decoder layer") {
  ModelManifest m;
  m.layers.push_back({"w", 256, 256, LayerRole::kDecoder, true});
  const auto r = compression_report(m, {4.0, 4.0, 256});
  CHECK(r.nominal_bits_per_weight == doctest::Approx(4.0625));
  CHECK(r.compression_ratio_nominal == doctest::Approx(16.0 / 4.0625));
  CHECK(std::abs(r.compression_ratio_nominal - 3.938) < 5e-4);
  CHECK(r.quantization_proportion == 100.0);
  CHECK(r.compression_ratio_physical == doctest::Approx(16.0 / r.physical_bits_per_weight));
}

TEST_CASE("physical code bits") {
  CHECK(physical_code_bits(1.58) == doctest::Approx(1.6));
  CHECK(physical_code_bits(4.0) == doctest::Approx(4.0));
  CHECK(physical_code_bits(2.79) == doctest::Approx(1.6 + 0.5 * 2.4));
  CHECK(physical_code_bits(8.0) == doctest::Approx(8.0));
}

TEST_CASE("Qwen3-0.6B table") {
  const auto m = manifest_from_shape(qwen3_0p6b_shape());
  const std::vector<std::pair<double, double>> table = {{4.0, 3.94}, {2.79, 5.05}, {1.88, 6.41}, {1.58, 7.04}};
  for (const auto& [bits, ratio] : table) {
    const auto r = compression_report(m, {bits, 4.0, 256});
    CAPTURE(bits);
    CHECK(std::abs(r.compression_ratio_nominal - ratio) <= 0.01);
    CHECK(r.quantization_proportion >= 99.9);
    CHECK(r.quantization_proportion < 100.0);
    CHECK(r.compression_ratio_physical <= r.compression_ratio_nominal + 1e-12);
  }
}

TEST_CASE("Qwen3-0.6B accounting by hand") {
  const auto m = manifest_from_shape(qwen3_0p6b_shape());
  const auto r = compression_report(m, {1.58, 4.0, 256});
  const double emb = 151936.0 * 1024;
  const double norms = 28.0 * (2 * 1024 + 2 * 128) + 1024;
  const double dec = static_cast<double>(m.total_params()) - emb - norms;
  const double bits = (dec * (1.58 + 0.0625) + emb * 4.0625 + norms * 16.0) / (dec + emb + norms);
  CHECK(r.nominal_bits_per_weight == doctest::Approx(bits).epsilon(1e-12));
  CHECK(r.quantization_proportion == doctest::Approx(100.0 * (dec + emb) / (dec + emb + norms)).epsilon(1e-12));
}

TEST_CASE("MobileLLM-350M at group 64") {
  const auto r = compression_report(manifest_from_shape(mobilellm_350m_shape()), {4.0, 4.0, 64});
  CHECK(std::abs(r.compression_ratio_nominal - 3.76) <= 0.01);
}

TEST_CASE("tied lm_head is not counted; untied one is") {
  ModelManifest m;
  m.tied_embedding = true;
  m.layers.push_back({"emb", 100, 8, LayerRole::kEmbedding, true});
  m.layers.push_back({"w", 8, 8, LayerRole::kDecoder, true});
  m.layers.push_back({"head", 100, 8, LayerRole::kLmHead, true});
  const auto tied = compression_report(m, {1.58, 4.0, 8});
  CHECK(tied.total_params == 864);
  CHECK(!tied.layers[2].counted);
  m.tied_embedding = false;
  CHECK(compression_report(m, {1.58, 4.0, 8}).total_params == 1664);
}

TEST_CASE("compression errors and proportion bounds") {
  ModelManifest m;
  m.tied_embedding = true;
  m.layers.push_back({"head", 10, 8, LayerRole::kLmHead, true});
  CHECK_THROWS_AS(compression_report(m, {1.58, 4.0, 256}), InputError);

  ModelManifest n;
  n.layers.push_back({"n", 10, 1, LayerRole::kNorm, false});
  const auto r = compression_report(n, {1.58, 4.0, 256});
  CHECK(r.quantization_proportion == 0.0);
  CHECK(r.compression_ratio_nominal == 1.0);
  CHECK_THROWS_AS(compression_report(n, {1.0, 4.0, 256}), InputError);
  CHECK_THROWS_AS(compression_report(n, {1.58, 4.0, 0}), InputError);
}
