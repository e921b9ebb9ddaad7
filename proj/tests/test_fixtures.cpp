// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "razorq/compression.hpp"
#include "razorq/goldens.hpp"

using namespace razorq;

namespace {

const std::filesystem::path kFixtures = std::filesystem::path(RAZORQ_SOURCE_DIR) / "fixtures";

std::string text(const std::filesystem::path& p) {
  const auto b = test::slurp(p);
  return {b.begin(), b.end()};
}

}  // namespace

TEST_CASE("checked-in goldens verify") {
  const auto results = verify_goldens(kFixtures);
  CHECK(results.size() == golden_case_names().size());
  for (const auto& r : results) {
    CAPTURE(r.name);
    for (const auto& m : r.mismatches) MESSAGE(m);
    CHECK(r.passed);
  }
}

TEST_CASE("golden files carry their regeneration recipe") {
  for (const auto& name : golden_case_names()) {
    const auto j = nlohmann::json::parse(text(kFixtures / "goldens" / (name + ".json")));
    CAPTURE(name);
    CHECK(j["name"] == name);
    CHECK(j.contains("inputs"));
    CHECK(j.contains("expected"));
    CHECK(j["tolerance"].get<double>() >= 0.0);
    CHECK(j["regenerate"].get<std::string>().find("regenerate") != std::string::npos);
  }
}

TEST_CASE("manifests match their shapes") {
  const auto q = manifest_from_shape(qwen3_0p6b_shape());
  const auto m = manifest_from_shape(mobilellm_350m_shape());
  CHECK(q.total_params() == 596049920);
  CHECK(m.total_params() == 345355200);
  CHECK(manifest_to_json(q).dump() ==
        manifest_to_json(load_manifest(kFixtures / "manifests" / "qwen3_0p6b.json")).dump());
  CHECK(manifest_to_json(m).dump() ==
        manifest_to_json(load_manifest(kFixtures / "manifests" / "mobilellm_350m.json")).dump());
}

TEST_CASE("regeneration reproduces the checked-in files") {
  test::TempDir dir;
  regenerate_goldens(dir.path());
  for (const auto& r : verify_goldens(dir.path())) CHECK(r.passed);
  for (const char* f : {"manifests/qwen3_0p6b.json", "manifests/mobilellm_350m.json"})
    CHECK(text(dir.path() / f) == text(kFixtures / f));
  for (const auto& name : golden_case_names()) {
    CAPTURE(name);
    const auto a = nlohmann::json::parse(text(dir.path() / "goldens" / (name + ".json")));
    const auto b = nlohmann::json::parse(text(kFixtures / "goldens" / (name + ".json")));
    CHECK(a["inputs"] == b["inputs"]);
  }
}

TEST_CASE("a tampered golden fails") {
  test::TempDir dir;
  regenerate_goldens(dir.path());
  const auto p = dir.path() / "goldens" / "effective_bitwidth.json";
  auto j = nlohmann::json::parse(text(p));
  REQUIRE(j["expected"].is_object());
  auto it = j["expected"].begin();
  while (it != j["expected"].end() && !it.value().is_number()) ++it;
  REQUIRE(it != j["expected"].end());
  it.value() = it.value().get<double>() + 1.0;
  test::spit(p, j.dump(2));
  bool failed = false;
  for (const auto& r : verify_goldens(dir.path()))
    if (r.name == "effective_bitwidth") failed = !r.passed;
  CHECK(failed);
  std::filesystem::remove(dir.path() / "goldens" / "quantizer_vectors.json");
  for (const auto& r : verify_goldens(dir.path()))
    if (r.name == "quantizer_vectors") CHECK_FALSE(r.passed);
}
