// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace razorq {

enum class LayerRole { kDecoder, kEmbedding, kLmHead, kNorm, kOther };

std::string to_string(LayerRole role);
LayerRole parse_layer_role(const std::string& s);

struct LayerSpec {
  std::string name;
  std::uint64_t d_out = 0;
  std::uint64_t d_in = 0;
  LayerRole role = LayerRole::kDecoder;
  bool quantize = true;

  std::uint64_t params() const { return d_out * d_in; }
};

/// Shape-only description of a model, used for compression accounting.
struct ModelManifest {
  std::vector<LayerSpec> layers;
  bool tied_embedding = false;

  /// Throws InputError on duplicate names or zero dimensions.
  void validate() const;

  /// False for lm_head layers when the embedding is tied: the shared tensor
  /// is stored once, under the embedding.
  bool counts(const LayerSpec& layer) const;

  std::uint64_t total_params() const;
  std::uint64_t quantized_params() const;
};

ModelManifest manifest_from_json(const nlohmann::json& j);
nlohmann::ordered_json manifest_to_json(const ModelManifest& m);
ModelManifest load_manifest(const std::filesystem::path& path);

}  // namespace razorq
