// SPDX-License-Identifier: Apache-2.0

#include "razorq/manifest.hpp"

#include <fstream>
#include <set>

#include "razorq/core.hpp"

namespace razorq {

std::string to_string(LayerRole role) {
  switch (role) {
    case LayerRole::kDecoder: return "decoder";
    case LayerRole::kEmbedding: return "embedding";
    case LayerRole::kLmHead: return "lm_head";
    case LayerRole::kNorm: return "norm";
    case LayerRole::kOther: return "other";
  }
  throw InvariantError("unknown LayerRole");
}

LayerRole parse_layer_role(const std::string& s) {
  if (s == "decoder") return LayerRole::kDecoder;
  if (s == "embedding") return LayerRole::kEmbedding;
  if (s == "lm_head") return LayerRole::kLmHead;
  if (s == "norm") return LayerRole::kNorm;
  if (s == "other") return LayerRole::kOther;
  throw InputError("unknown layer role '" + s + "'");
}

void ModelManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& l : layers) {
    require(!l.name.empty(), "layer with empty name");
    require(seen.insert(l.name).second, "duplicate layer name '" + l.name + "'");
    require(l.d_out >= 1 && l.d_in >= 1, "layer '" + l.name + "' has a zero dimension");
  }
}

bool ModelManifest::counts(const LayerSpec& layer) const {
  return !(tied_embedding && layer.role == LayerRole::kLmHead);
}

std::uint64_t ModelManifest::total_params() const {
  std::uint64_t n = 0;
  for (const auto& l : layers)
    if (counts(l)) n += l.params();
  return n;
}

std::uint64_t ModelManifest::quantized_params() const {
  std::uint64_t n = 0;
  for (const auto& l : layers)
    if (counts(l) && l.quantize && l.role != LayerRole::kNorm) n += l.params();
  return n;
}

ModelManifest manifest_from_json(const nlohmann::json& j) {
  require(j.is_object(), "manifest must be a JSON object");
  ModelManifest m;
  try {
    m.tied_embedding = j.value("tied_embedding", false);
    require(j.contains("layers") && j.at("layers").is_array(), "manifest needs a 'layers' array");
    for (const auto& jl : j.at("layers")) {
      LayerSpec l;
      l.name = jl.at("name").get<std::string>();
      const auto d_out = jl.at("d_out").get<std::int64_t>();
      const auto d_in = jl.at("d_in").get<std::int64_t>();
      require(d_out >= 1 && d_in >= 1, "layer '" + l.name + "' has a nonpositive dimension");
      l.d_out = static_cast<std::uint64_t>(d_out);
      l.d_in = static_cast<std::uint64_t>(d_in);
      l.role = parse_layer_role(jl.at("role").get<std::string>());
      l.quantize = jl.at("quantize").get<bool>();
      m.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::ordered_json manifest_to_json(const ModelManifest& m) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"name", l.name},
                      {"d_out", l.d_out},
                      {"d_in", l.d_in},
                      {"role", to_string(l.role)},
                      {"quantize", l.quantize}});
  }
  nlohmann::ordered_json j;
  j["tied_embedding"] = m.tied_embedding;
  j["layers"] = std::move(layers);
  return j;
}

ModelManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace razorq
