// SPDX-License-Identifier: Apache-2.0

#include "razorq/layout.hpp"

#include <cmath>
#include <numeric>

#include "razorq/core.hpp"
#include "razorq/rng.hpp"

namespace razorq {

std::string to_string(AllocationScheme s) {
  switch (s) {
    case AllocationScheme::kSuperGroup: return "super";
    case AllocationScheme::kStacked: return "stacked";
    case AllocationScheme::kRandom: return "random";
  }
  throw InvariantError("unknown AllocationScheme");
}

AllocationScheme parse_scheme(const std::string& s) {
  if (s == "super" || s == "supergroup" || s == "super-group") return AllocationScheme::kSuperGroup;
  if (s == "stacked") return AllocationScheme::kStacked;
  if (s == "random") return AllocationScheme::kRandom;
  throw InputError("unknown allocation scheme '" + s + "' (expected super, stacked or random)");
}

std::size_t AllocationPlan::four_bit_count() const {
  return static_cast<std::size_t>(std::count(assignment.begin(), assignment.end(), std::uint8_t{1}));
}

std::string AllocationPlan::bit_string() const {
  std::string s(assignment.size(), '0');
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i]) s[i] = '1';
  return s;
}

std::size_t super_group_period(double rho) {
  require(rho > 0.0 && rho <= 1.0, "super-group period needs 0 < rho <= 1");
  return static_cast<std::size_t>(std::nearbyint(1.0 / rho));
}

namespace {

std::size_t target_count(std::size_t rows, double rho) {
  return static_cast<std::size_t>(std::nearbyint(rho * static_cast<double>(rows)));
}

}  // namespace

AllocationPlan build_plan(std::size_t rows, double rho, AllocationScheme scheme,
                          std::optional<std::uint64_t> seed) {
  require(rows >= 1, "allocation plan needs at least one row");
  require(std::isfinite(rho) && rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
  require(scheme != AllocationScheme::kRandom || seed.has_value(), "random allocation requires a seed");

  AllocationPlan plan;
  plan.rows = rows;
  plan.rho = rho;
  plan.scheme = scheme;
  if (scheme == AllocationScheme::kRandom) plan.seed = seed;
  plan.assignment.assign(rows, 0);

  if (rho == 0.0) return plan;
  if (rho == 1.0) {
    std::fill(plan.assignment.begin(), plan.assignment.end(), std::uint8_t{1});
    return plan;
  }

  switch (scheme) {
    case AllocationScheme::kSuperGroup: {
      const std::size_t period = super_group_period(rho);
      for (std::size_t i = 0; i < rows; i += period) plan.assignment[i] = 1;
      break;
    }
    case AllocationScheme::kStacked: {
      const std::size_t n = target_count(rows, rho);
      std::fill_n(plan.assignment.begin(), n, std::uint8_t{1});
      break;
    }
    case AllocationScheme::kRandom: {
      SeededRng rng(*seed);
      for (std::size_t i : rng.sample_without_replacement(rows, target_count(rows, rho)))
        plan.assignment[i] = 1;
      break;
    }
  }
  return plan;
}

AllocationPlan uniform_plan(std::size_t rows, bool four_bit) {
  return build_plan(rows, four_bit ? 1.0 : 0.0, AllocationScheme::kSuperGroup);
}

double effective_bitwidth(const AllocationPlan& plan) {
  ensure(plan.rows == plan.assignment.size() && plan.rows > 0, "malformed allocation plan");
  const auto n4 = static_cast<double>(plan.four_bit_count());
  const auto total = static_cast<double>(plan.rows);
  return (kInt4Bits * n4 + kTernaryBits * (total - n4)) / total;
}

nlohmann::ordered_json plan_to_json(const AllocationPlan& plan) {
  nlohmann::ordered_json j;
  j["rows"] = plan.rows;
  j["rho"] = plan.rho;
  j["scheme"] = to_string(plan.scheme);
  if (plan.seed) j["seed"] = *plan.seed;
  j["assignment"] = plan.bit_string();
  return j;
}

AllocationPlan plan_from_json(const nlohmann::json& j) {
  try {
    AllocationPlan plan;
    plan.rows = j.at("rows").get<std::size_t>();
    plan.rho = j.at("rho").get<double>();
    plan.scheme = parse_scheme(j.at("scheme").get<std::string>());
    if (j.contains("seed")) plan.seed = j.at("seed").get<std::uint64_t>();
    const auto bits = j.at("assignment").get<std::string>();
    require(bits.size() == plan.rows, "plan assignment length does not match rows");
    for (char c : bits) {
      require(c == '0' || c == '1', "plan assignment must be a string of 0/1");
      plan.assignment.push_back(c == '1' ? 1 : 0);
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed plan JSON: ") + e.what());
  }
}

}  // namespace razorq
