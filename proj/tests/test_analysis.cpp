// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "razorq/analysis.hpp"
#include "razorq/core.hpp"

using namespace razorq;

namespace {

// Brute-force D*: sup over anchors t of |#{p < t}/N - t|, checked at every
// point from both sides.
double brute_discrepancy(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double best = 0.0;
  for (double t : p) {
    double below = 0, upto = 0;
    for (double q : p) {
      below += q < t;
      upto += q <= t;
    }
    best = std::max({best, std::abs(below / n - t), std::abs(upto / n - t)});
  }
  best = std::max(best, 1.0 - p.back());  // t = 1
  return best;
}

AllocationPlan plan_from_bits(const std::vector<int>& bits) {
  AllocationPlan p;
  p.rows = bits.size();
  p.assignment.assign(bits.begin(), bits.end());
  return p;
}

SalienceProfile random_profile(std::size_t n, SeededRng& rng) {
  // piecewise smooth with a few jumps
  std::vector<double> v(n);
  const double f = rng.uniform(0.5, 6.0), phase = rng.uniform(0, 6.3);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (i + 0.5) / static_cast<double>(n);
    v[i] = 1.0 + std::sin(f * x + phase) + (x > 0.6 ? rng.uniform(0, 0.5) : 0.0);
  }
  return SalienceProfile(v);
}

}  // namespace

TEST_CASE("allocation points") {
  auto pts = allocation_points(build_plan(16, 0.25, AllocationScheme::kStacked));
  CHECK(pts == std::vector<double>{0.5 / 16, 1.5 / 16, 2.5 / 16, 3.5 / 16});
  pts = allocation_points(build_plan(16, 0.25, AllocationScheme::kSuperGroup));
  CHECK(pts == std::vector<double>{0.5 / 16, 4.5 / 16, 8.5 / 16, 12.5 / 16});
  CHECK(allocation_points(build_plan(2, 1.0, AllocationScheme::kStacked)) == std::vector<double>{0.25, 0.75});
  CHECK_THROWS_AS(allocation_points(build_plan(8, 0.0, AllocationScheme::kStacked)), InputError);
}

TEST_CASE("star discrepancy examples") {
  CHECK(star_discrepancy({0.125, 0.375, 0.625, 0.875}) == doctest::Approx(0.125));
  CHECK(star_discrepancy(allocation_points(build_plan(16, 0.25, AllocationScheme::kStacked))) ==
        doctest::Approx(0.78125));
  CHECK(star_discrepancy(allocation_points(build_plan(16, 0.25, AllocationScheme::kSuperGroup))) ==
        doctest::Approx(0.21875));
  CHECK_THROWS_AS(star_discrepancy({0.5, 1.2}), InputError);
  CHECK_THROWS_AS(star_discrepancy({-0.1}), InputError);
  CHECK_THROWS_AS(star_discrepancy({}), InputError);
}

TEST_CASE("star discrepancy equals the brute-force oracle and stays in range") {
  SeededRng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> p(n);
    for (auto& x : p) x = rng.uniform01();
    if (trial % 3 == 0) p[0] = p[n - 1];  // duplicates
    const double d = star_discrepancy(p);
    CHECK(d == doctest::Approx(brute_discrepancy(p)).epsilon(1e-12));
    CHECK(d >= 0.5 / static_cast<double>(n) - 1e-15);
    CHECK(d <= 1.0);
  }
}

TEST_CASE("alignment and total variation") {
  const auto plan = build_plan(12, 0.25, AllocationScheme::kSuperGroup);
  CHECK(alignment(plan, SalienceProfile(std::vector<double>(12, 2.5))) == doctest::Approx(2.5 * 3));
  std::vector<double> onehot(12, 0.0);
  onehot[4] = 1.0;
  CHECK(alignment(plan, SalienceProfile(onehot)) == 1.0);
  SeededRng rng(32);
  const auto s = random_profile(12, rng);
  double dot = 0.0;
  for (std::size_t i = 0; i < 12; ++i) dot += plan.assignment[i] * s[i];
  CHECK(alignment(plan, s) == doctest::Approx(dot));
  CHECK_THROWS_AS(alignment(plan, SalienceProfile(std::vector<double>(5, 1.0))), InputError);

  CHECK(total_variation(SalienceProfile({3, 3, 3})) == 0.0);
  CHECK(total_variation(SalienceProfile({0, 1, 0})) == 2.0);
  CHECK(total_variation(SalienceProfile({0.5, 1, 2, 7})) == 6.5);
  CHECK(total_variation(SalienceProfile({4})) == 0.0);
  CHECK_THROWS_AS(SalienceProfile({1, -1}), InputError);
  CHECK_THROWS_AS(SalienceProfile({1, std::nan("")}), InputError);
}

TEST_CASE("Koksma-Hlawka") {
  SUBCASE("constant profile") {
    const auto k = kh_bound(build_plan(32, 0.25, AllocationScheme::kStacked), SalienceProfile(std::vector<double>(32, 1.0)));
    CHECK(k.bound == 0.0);
    CHECK(k.empirical_gap == doctest::Approx(0.0).epsilon(1e-15));
  }
  SUBCASE("gap never exceeds the bound") {
    SeededRng rng(33);
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t rows = 16 + rng.below(240);
      const double rho = rng.uniform(0.05, 0.6);
      const auto scheme = static_cast<AllocationScheme>(rng.below(3));
      const auto plan = build_plan(rows, rho, scheme, rng.next());
      if (plan.four_bit_count() == 0) continue;
      const auto s = random_profile(rows, rng);
      const auto k = kh_bound(plan, s);
      double all = 0, hi = 0;
      for (std::size_t i = 0; i < rows; ++i) {
        all += s[i];
        hi += plan.assignment[i] * s[i];
      }
      const double gap = std::abs(hi / plan.four_bit_count() - all / rows);
      CHECK(k.empirical_gap == doctest::Approx(gap).epsilon(1e-12));
      CHECK(k.empirical_gap <= k.bound + 1e-12);
      CHECK(k.bound >= 0.0);
    }
  }
  SUBCASE("adversarial block profile") {
    const std::size_t rows = 256;
    for (double rho : {0.5, 0.25, 0.125}) {
      const std::size_t n = static_cast<std::size_t>(rho * rows);
      std::vector<double> v(rows, 0.0);
      std::fill(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n), 1.0);
      const SalienceProfile s(v);
      const auto stacked = kh_bound(build_plan(rows, rho, AllocationScheme::kStacked), s);
      const auto super = kh_bound(build_plan(rows, rho, AllocationScheme::kSuperGroup), s);
      CHECK(stacked.empirical_gap == doctest::Approx(1.0 - rho));
      CHECK(super.empirical_gap <= total_variation(s) / static_cast<double>(n) + 1e-12);
    }
  }
}

TEST_CASE("surrogate loss") {
  SeededRng rng(34);
  const auto s = random_profile(10, rng);
  double total = 0;
  for (double v : s.values()) total += v;
  const auto plan = build_plan(10, 0.3, AllocationScheme::kSuperGroup);
  CHECK(surrogate_loss(plan, s, 0.7, 0.7) == doctest::Approx(0.7 * total));
  CHECK(surrogate_loss(build_plan(10, 1.0, AllocationScheme::kStacked), s, 0.9, 0.2) == doctest::Approx(0.2 * total));
  CHECK_THROWS_AS(surrogate_loss(plan, s, 0.2, 0.9), InputError);
}

TEST_CASE("surrogate minimizer equals alignment maximizer (enumeration)") {
  SeededRng rng(35);
  for (std::size_t rows = 2; rows <= 12; ++rows) {
    const auto s = random_profile(rows, rng);
    double total = 0;
    for (double v : s.values()) total += v;
    for (std::size_t n = 1; n < rows; ++n) {
      double best_loss = 1e300, best_align = -1e300;
      std::uint32_t arg_loss = 0, arg_align = 0;
      for (std::uint32_t mask = 0; mask < (1u << rows); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
        std::vector<int> bits(rows);
        for (std::size_t i = 0; i < rows; ++i) bits[i] = (mask >> i) & 1;
        const auto p = plan_from_bits(bits);
        const double loss = surrogate_loss(p, s, 1.0, 0.25);
        const double a = alignment(p, s);
        // affine: L = e_L sum S - (e_L - e_H) A
        CHECK(loss == doctest::Approx(total - 0.75 * a).epsilon(1e-12));
        if (loss < best_loss) best_loss = loss, arg_loss = mask;
        if (a > best_align) best_align = a, arg_align = mask;
      }
      CHECK(arg_loss == arg_align);
    }
  }
}

TEST_CASE("discrepancy orders across the sweep") {
  for (std::size_t rows : {64u, 256u, 1024u}) {
    for (double rho : {0.5, 0.25, 0.125}) {
      CAPTURE(rows);
      CAPTURE(rho);
      const auto super = build_plan(rows, rho, AllocationScheme::kSuperGroup);
      const double n = static_cast<double>(super.four_bit_count());
      const double d_super = star_discrepancy(allocation_points(super));
      const double d_stacked = star_discrepancy(allocation_points(build_plan(rows, rho, AllocationScheme::kStacked)));
      CHECK(d_super <= 1.0 / n);
      CHECK(std::abs(d_stacked - (1.0 - rho)) <= 1.0 / static_cast<double>(rows));
      std::vector<double> scaled;
      int ties = 0;
      for (std::uint64_t seed = 42; seed < 142; ++seed) {
        const double d = star_discrepancy(allocation_points(build_plan(rows, rho, AllocationScheme::kRandom, seed)));
        // A random draw can land on a layout exactly as even as the
        // super-group one (seen at 64 rows, N = 8); it never does better.
        CHECK(d_super <= d);
        ties += d == d_super;
        CHECK(d < d_stacked);
        scaled.push_back(d * std::sqrt(n));
      }
      CHECK(ties <= 3);
      std::sort(scaled.begin(), scaled.end());
      const double median = 0.5 * (scaled[49] + scaled[50]);
      CHECK(median >= 0.3);
      CHECK(median <= 3.0);
    }
  }
}

TEST_CASE("analysis report and sweep csv") {
  const auto plan = build_plan(64, 0.125, AllocationScheme::kSuperGroup);
  SeededRng rng(36);
  const auto s = random_profile(64, rng);
  const auto r = analyze_plan(plan, s, 1.0, 0.1);
  CHECK(r.rows == 64);
  CHECK(r.four_bit_rows == 8);
  CHECK(r.discrepancy == star_discrepancy(allocation_points(plan)));
  CHECK(r.kh_bound == doctest::Approx(r.total_variation * r.discrepancy));
  CHECK(r.surrogate == surrogate_loss(plan, s, 1.0, 0.1));
  const auto j = report_to_json(r);
  CHECK(j.contains("discrepancy"));
  CHECK(j.contains("kh_bound"));

  const auto sweep = discrepancy_sweep({0.5, 0.25}, {64}, 42, 3);
  CHECK(sweep.size() == 2 * (1 + 1 + 3));
  const auto csv = sweep_to_csv(sweep);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "rho,d_out,scheme,seed,n,discrepancy");
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == sweep.size());
}
