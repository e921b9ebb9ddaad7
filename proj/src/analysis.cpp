// SPDX-License-Identifier: Apache-2.0

#include "razorq/analysis.hpp"

#include <cmath>
#include <cstdio>

#include "razorq/core.hpp"

namespace razorq {

SalienceProfile::SalienceProfile(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) require(std::isfinite(v) && v >= 0.0, "salience values must be finite and nonnegative");
}

std::vector<double> allocation_points(const AllocationPlan& plan) {
  require(plan.assignment.size() == plan.rows && plan.rows > 0, "malformed allocation plan");
  std::vector<double> points;
  const auto d = static_cast<double>(plan.rows);
  for (std::size_t i = 0; i < plan.rows; ++i)
    if (plan.is_four_bit(i)) points.push_back((static_cast<double>(i) + 0.5) / d);
  require(!points.empty(), "plan has no 4-bit rows");
  return points;
}

double star_discrepancy(std::vector<double> points) {
  require(!points.empty(), "star discrepancy needs at least one point");
  for (double p : points) require(p >= 0.0 && p <= 1.0, "points must lie in [0, 1]");
  std::sort(points.begin(), points.end());
  const auto n = static_cast<double>(points.size());
  double d = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double i = static_cast<double>(k + 1);
    d = std::max({d, i / n - points[k], points[k] - (i - 1.0) / n});
  }
  return d;
}

namespace {

void check_lengths(const AllocationPlan& plan, const SalienceProfile& s) {
  require(plan.rows == s.size(), "salience profile has " + std::to_string(s.size()) + " rows, plan has " +
                                     std::to_string(plan.rows));
}

}  // namespace

double alignment(const AllocationPlan& plan, const SalienceProfile& s) {
  check_lengths(plan, s);
  double a = 0.0;
  for (std::size_t i = 0; i < plan.rows; ++i)
    if (plan.is_four_bit(i)) a += s[i];
  return a;
}

double total_variation(const SalienceProfile& s) {
  require(s.size() >= 1, "salience profile is empty");
  double tv = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) tv += std::abs(s[i] - s[i - 1]);
  return tv;
}

KhBound kh_bound(const AllocationPlan& plan, const SalienceProfile& s) {
  check_lengths(plan, s);
  const double d = star_discrepancy(allocation_points(plan));
  double all = 0.0;
  for (double v : s.values()) all += v;
  const double mean_all = all / static_cast<double>(s.size());
  const double mean_hi = alignment(plan, s) / static_cast<double>(plan.four_bit_count());
  return {total_variation(s) * d, std::abs(mean_hi - mean_all)};
}

double surrogate_loss(const AllocationPlan& plan, const SalienceProfile& s, double e_low, double e_high) {
  check_lengths(plan, s);
  require(std::isfinite(e_low) && std::isfinite(e_high), "error levels must be finite");
  require(e_high <= e_low, "high-precision error must not exceed low-precision error");
  double loss = 0.0;
  for (std::size_t i = 0; i < plan.rows; ++i)
    loss += (e_low - (plan.is_four_bit(i) ? 1.0 : 0.0) * (e_low - e_high)) * s[i];
  return loss;
}

AnalysisReport analyze_plan(const AllocationPlan& plan, const SalienceProfile& s, double e_low, double e_high) {
  AnalysisReport r;
  r.rows = plan.rows;
  r.four_bit_rows = plan.four_bit_count();
  r.discrepancy = star_discrepancy(allocation_points(plan));
  r.alignment = alignment(plan, s);
  r.total_variation = total_variation(s);
  const auto kh = kh_bound(plan, s);
  r.kh_bound = kh.bound;
  r.empirical_gap = kh.empirical_gap;
  r.surrogate = surrogate_loss(plan, s, e_low, e_high);
  r.e_low = e_low;
  r.e_high = e_high;
  return r;
}

nlohmann::ordered_json report_to_json(const AnalysisReport& r) {
  nlohmann::ordered_json j;
  j["d_out"] = r.rows;
  j["four_bit_rows"] = r.four_bit_rows;
  j["discrepancy"] = r.discrepancy;
  j["alignment"] = r.alignment;
  j["total_variation"] = r.total_variation;
  j["kh_bound"] = r.kh_bound;
  j["empirical_gap"] = r.empirical_gap;
  j["surrogate"] = r.surrogate;
  j["e_low"] = r.e_low;
  j["e_high"] = r.e_high;
  return j;
}

std::vector<SweepRow> discrepancy_sweep(const std::vector<double>& rhos, const std::vector<std::size_t>& rows,
                                        std::uint64_t seed0, std::size_t random_seeds) {
  std::vector<SweepRow> out;
  for (double rho : rhos) {
    for (std::size_t d : rows) {
      for (auto scheme : {AllocationScheme::kSuperGroup, AllocationScheme::kStacked, AllocationScheme::kRandom}) {
        const std::size_t runs = scheme == AllocationScheme::kRandom ? random_seeds : 1;
        for (std::size_t k = 0; k < runs; ++k) {
          SweepRow row{rho, d, scheme, seed0 + k, 0, 0.0};
          const auto plan = build_plan(d, rho, scheme, row.seed);
          row.four_bit_rows = plan.four_bit_count();
          row.discrepancy = star_discrepancy(allocation_points(plan));
          if (scheme != AllocationScheme::kRandom) row.seed = 0;
          out.push_back(row);
        }
      }
    }
  }
  return out;
}

std::string sweep_to_csv(const std::vector<SweepRow>& sweep) {
  std::string csv = "rho,d_out,scheme,seed,n,discrepancy\n";
  char buf[160];
  for (const auto& r : sweep) {
    const std::string seed = r.scheme == AllocationScheme::kRandom ? std::to_string(r.seed) : "";
    std::snprintf(buf, sizeof buf, "%.17g,%zu,%s,%s,%zu,%.17g\n", r.rho, r.rows, to_string(r.scheme).c_str(),
                  seed.c_str(), r.four_bit_rows, r.discrepancy);
    csv += buf;
  }
  return csv;
}

}  // namespace razorq
