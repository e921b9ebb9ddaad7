// SPDX-License-Identifier: Apache-2.0
//
// Storage accounting for a whole model.
//
// Nominal bits count a ternary weight as 1.58 bits; physical bits count what
// the packed formats actually spend (1.6 bits per trit, 4 per nibble). Both
// add 16 bits of scale per group. Norm layers and layers marked
// quantize=false stay at 16 bits.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "razorq/manifest.hpp"

namespace razorq {

struct CompressionPolicy {
  double decoder_bitwidth = kDefaultDecoderBits;
  double embedding_bitwidth = 4.0;
  std::size_t group_size = 256;

  static constexpr double kDefaultDecoderBits = 1.58;
  void validate() const;
};

struct LayerCompression {
  std::string name;
  LayerRole role = LayerRole::kDecoder;
  std::uint64_t params = 0;
  bool counted = true;    ///< false for a tied lm_head
  bool quantized = true;
  double nominal_bits_per_weight = 16.0;
  double physical_bits_per_weight = 16.0;
};

struct CompressionReport {
  std::vector<LayerCompression> layers;
  std::uint64_t total_params = 0;
  std::uint64_t quantized_params = 0;
  double nominal_bits_per_weight = 16.0;
  double physical_bits_per_weight = 16.0;
  double quantization_proportion = 0.0;  // percent
  double compression_ratio_nominal = 1.0;
  double compression_ratio_physical = 1.0;
};

/// Bits per weight a packed row stream spends at a given nominal bit-width,
/// excluding scales. Between 1.58 and 4 the mix is linear in the 4-bit
/// fraction.
double physical_code_bits(double nominal_bitwidth);

CompressionReport compression_report(const ModelManifest& manifest, const CompressionPolicy& policy);

nlohmann::ordered_json report_to_json(const CompressionReport& r);

}  // namespace razorq
