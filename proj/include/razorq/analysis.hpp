// SPDX-License-Identifier: Apache-2.0
//
// Uniformity analysis of allocation plans.
//
// The 4-bit rows of a plan are read as N points in [0, 1] (row midpoints).
// A per-row salience profile S is read as a step function on the same grid.
// Koksma-Hlawka then bounds how far the mean salience seen by the 4-bit rows
// can drift from the mean over all rows:
//
//   |mean_k S(p_k) - mean_i S_i| <= V(S) * D*_N

#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "razorq/layout.hpp"

namespace razorq {

/// Nonnegative finite per-row salience values.
class SalienceProfile {
 public:
  SalienceProfile() = default;
  explicit SalienceProfile(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

/// (i + 0.5) / d_out for every 4-bit row i, ascending.
std::vector<double> allocation_points(const AllocationPlan& plan);

/// Exact star discrepancy: max over sorted points of max(i/N - p_(i), p_(i) - (i-1)/N).
double star_discrepancy(std::vector<double> points);

/// sum_i a_i S_i
double alignment(const AllocationPlan& plan, const SalienceProfile& s);

/// sum_i |S_{i+1} - S_i|
double total_variation(const SalienceProfile& s);

struct KhBound {
  double bound = 0.0;          ///< V(S) * D*_N
  double empirical_gap = 0.0;  ///< |mean over 4-bit rows - mean over all rows|
};

KhBound kh_bound(const AllocationPlan& plan, const SalienceProfile& s);

/// sum_i (e_L - a_i (e_L - e_H)) S_i. Requires e_H <= e_L.
double surrogate_loss(const AllocationPlan& plan, const SalienceProfile& s, double e_low, double e_high);

struct AnalysisReport {
  std::size_t rows = 0;
  std::size_t four_bit_rows = 0;
  double discrepancy = 0.0;
  double alignment = 0.0;
  double total_variation = 0.0;
  double kh_bound = 0.0;
  double empirical_gap = 0.0;
  double surrogate = 0.0;
  double e_low = 1.0;
  double e_high = 0.0;
};

AnalysisReport analyze_plan(const AllocationPlan& plan, const SalienceProfile& s, double e_low, double e_high);

nlohmann::ordered_json report_to_json(const AnalysisReport& r);

struct SweepRow {
  double rho = 0.0;
  std::size_t rows = 0;
  AllocationScheme scheme = AllocationScheme::kSuperGroup;
  std::uint64_t seed = 0;
  std::size_t four_bit_rows = 0;
  double discrepancy = 0.0;
};

/// D*_N for every (rho, rows, scheme) combination; Random plans use seeds
/// seed0 .. seed0 + random_seeds - 1.
std::vector<SweepRow> discrepancy_sweep(const std::vector<double>& rhos, const std::vector<std::size_t>& rows,
                                        std::uint64_t seed0, std::size_t random_seeds);

/// Header "rho,d_out,scheme,seed,n,discrepancy"; seed is empty for
/// deterministic schemes.
std::string sweep_to_csv(const std::vector<SweepRow>& sweep);

}  // namespace razorq
