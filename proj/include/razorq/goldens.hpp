// SPDX-License-Identifier: Apache-2.0
//
// Checked-in fixtures: model-shape manifests and golden result files.
//
// Layout under a fixtures directory:
//
//   manifests/qwen3_0p6b.json       Qwen3-0.6B-shaped manifest
//   manifests/mobilellm_350m.json   MobileLLM-350M-shaped manifest
//   goldens/<case>.json             {name, regenerate, inputs, tolerance, expected}
//
// `regenerate_goldens` rewrites every file; `verify_goldens` recomputes each
// case and compares it against the file within the stored tolerance.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "razorq/manifest.hpp"

namespace razorq {

/// Shape parameters of a decoder-only transformer, as published in a model's
/// configuration.
struct TransformerShape {
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t heads = 0;
  std::size_t kv_heads = 0;
  std::size_t head_dim = 0;
  std::size_t intermediate = 0;
  std::size_t vocab = 0;
  bool tied_embedding = true;
  bool qk_norm = false;
};

TransformerShape qwen3_0p6b_shape();
TransformerShape mobilellm_350m_shape();

/// Projections (q, k, v, o, gate, up, down) per block as decoder layers, the
/// per-block and final norms as unquantized norm layers, the embedding, and
/// the lm_head.
ModelManifest manifest_from_shape(const TransformerShape& s);

struct GoldenResult {
  std::string name;
  bool passed = true;
  std::vector<std::string> mismatches;  // "<key>: expected X, got Y"
};

std::vector<std::string> golden_case_names();

void regenerate_goldens(const std::filesystem::path& fixtures_dir);
std::vector<GoldenResult> verify_goldens(const std::filesystem::path& fixtures_dir);

}  // namespace razorq
