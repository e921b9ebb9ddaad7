// SPDX-License-Identifier: Apache-2.0

#include "razorq/compression.hpp"

#include <cmath>

#include "razorq/core.hpp"
#include "razorq/layout.hpp"

namespace razorq {

namespace {

constexpr double kTritBits = 8.0 / 5.0;
constexpr double kScaleBits = 16.0;
constexpr double kFullBits = 16.0;

}  // namespace

void CompressionPolicy::validate() const {
  require(group_size >= 1, "group size must be at least 1");
  for (double b : {decoder_bitwidth, embedding_bitwidth})
    require(std::isfinite(b) && b >= kTernaryBits - 1e-12 && b <= kFullBits,
            "bit-width " + std::to_string(b) + " is outside [1.58, 16]");
}

double physical_code_bits(double nominal_bitwidth) {
  if (nominal_bitwidth <= kTernaryBits) return kTritBits;
  if (nominal_bitwidth < kInt4Bits) {
    const double four_bit_fraction = (nominal_bitwidth - kTernaryBits) / (kInt4Bits - kTernaryBits);
    return kTritBits + four_bit_fraction * (kInt4Bits - kTritBits);
  }
  return nominal_bitwidth;
}

CompressionReport compression_report(const ModelManifest& manifest, const CompressionPolicy& policy) {
  manifest.validate();
  policy.validate();
  const double scale_overhead = kScaleBits / static_cast<double>(policy.group_size);

  CompressionReport r;
  double nominal_bits = 0.0;
  double physical_bits = 0.0;
  for (const auto& spec : manifest.layers) {
    LayerCompression l;
    l.name = spec.name;
    l.role = spec.role;
    l.params = spec.params();
    l.counted = manifest.counts(spec);
    l.quantized = spec.quantize && spec.role != LayerRole::kNorm;
    if (l.quantized) {
      const bool outer = spec.role == LayerRole::kEmbedding || spec.role == LayerRole::kLmHead;
      const double bits = outer ? policy.embedding_bitwidth : policy.decoder_bitwidth;
      l.nominal_bits_per_weight = bits + scale_overhead;
      l.physical_bits_per_weight = physical_code_bits(bits) + scale_overhead;
    }
    if (l.counted) {
      r.total_params += l.params;
      if (l.quantized) r.quantized_params += l.params;
      nominal_bits += l.nominal_bits_per_weight * static_cast<double>(l.params);
      physical_bits += l.physical_bits_per_weight * static_cast<double>(l.params);
    }
    r.layers.push_back(std::move(l));
  }
  require(r.total_params > 0, "manifest has zero parameters");
  const auto total = static_cast<double>(r.total_params);
  r.nominal_bits_per_weight = nominal_bits / total;
  r.physical_bits_per_weight = physical_bits / total;
  r.quantization_proportion = 100.0 * static_cast<double>(r.quantized_params) / total;
  r.compression_ratio_nominal = kFullBits / r.nominal_bits_per_weight;
  r.compression_ratio_physical = kFullBits / r.physical_bits_per_weight;
  return r;
}

nlohmann::ordered_json report_to_json(const CompressionReport& r) {
  nlohmann::ordered_json j;
  j["total_params"] = r.total_params;
  j["quantized_params"] = r.quantized_params;
  j["quantization_proportion"] = r.quantization_proportion;
  j["nominal_bits_per_weight"] = r.nominal_bits_per_weight;
  j["physical_bits_per_weight"] = r.physical_bits_per_weight;
  j["compression_ratio_nominal"] = r.compression_ratio_nominal;
  j["compression_ratio_physical"] = r.compression_ratio_physical;
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : r.layers) {
    nlohmann::ordered_json e;
    e["name"] = l.name;
    e["role"] = to_string(l.role);
    e["params"] = l.params;
    e["counted"] = l.counted;
    e["quantized"] = l.quantized;
    e["nominal_bits_per_weight"] = l.nominal_bits_per_weight;
    e["physical_bits_per_weight"] = l.physical_bits_per_weight;
    layers.push_back(std::move(e));
  }
  return j;
}

}  // namespace razorq
