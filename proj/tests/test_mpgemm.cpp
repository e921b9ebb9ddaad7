// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "razorq/half.hpp"
#include "razorq/mpgemm.hpp"

using namespace razorq;

namespace {

// max |a - b| / max |b|
template <typename A, typename B>
double matrix_rel_err(const Matrix<A>& a, const Matrix<B>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
    den = std::max(den, std::abs(static_cast<double>(b.data()[i])));
  }
  return den == 0.0 ? num : num / den;
}

struct Case {
  QuantizedGroupMatrix wq, xq;
};

Case random_case(std::size_t rows, std::size_t inner, std::size_t tokens, std::size_t group, SeededRng& rng) {
  const GroupQuantConfig cfg{group, 2.0, 1e-5};
  const auto w = test::random_matrix(rows, inner, rng);
  const auto x = test::random_matrix(inner, tokens, rng);
  const auto plan = build_plan(rows, 0.25, AllocationScheme::kRandom, rng.next());
  return {quantize_matrix(w, plan, cfg), quantize_activations(x, cfg)};
}

}  // namespace

TEST_CASE("hand example") {
  const GroupQuantConfig cfg{4, 2.0, 1e-5};
  const QuantizedGroupMatrix wq(1, 4, GroupAxis::kRows, cfg, {BitMode::kTernary}, {1, -1, 0, 0}, {2.0f});
  const float s_x = static_cast<float>(half::round(0.1));
  const QuantizedGroupMatrix xq(4, 1, GroupAxis::kColumns, cfg, {BitMode::kInt8}, {10, 20, 0, 5}, {s_x});
  const auto y = mp_matmul(wq, xq);
  CHECK(y(0, 0) == (2.0f * s_x) * -10.0f);
  CHECK(y(0, 0) == doctest::Approx(-2.0).epsilon(1e-3));  // 0.1 is not a binary16 value
}

TEST_CASE("zero weight codes give zero output") {
  SeededRng rng(1);
  const GroupQuantConfig cfg{8, 2.0, 1e-5};
  const auto wq = quantize_matrix(DenseMatrix(5, 20), build_plan(5, 0.5, AllocationScheme::kSuperGroup), cfg);
  const auto xq = quantize_activations(test::random_matrix(20, 3, rng), cfg);
  CHECK(mp_matmul(wq, xq) == DenseMatrix(5, 3));
}

TEST_CASE("matches the dequantized reference") {
  SeededRng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.below(64), inner = 1 + rng.below(64), tokens = 1 + rng.below(128);
    const std::size_t group = std::vector<std::size_t>{1, 4, 8, 16, 32, 64}[rng.below(6)];
    const auto c = random_case(rows, inner, tokens, group, rng);
    const auto y = mp_matmul(c.wq, c.xq);
    const auto ref = test::naive_matmul(dequantize<float>(c.wq), dequantize<float>(c.xq));
    CHECK(matrix_rel_err(y, ref) <= 1e-5);
  }
}

TEST_CASE("agrees with the Int8 fake-quant forward") {
  SeededRng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t rows = 1 + rng.below(256), inner = 1 + rng.below(256), tokens = 1 + rng.below(64);
    const GroupQuantConfig cfg{32, 2.0, 1e-5};
    const auto w = test::random_matrix(rows, inner, rng);
    const auto x = test::random_matrix(inner, tokens, rng);
    const auto plan = build_plan(rows, 0.125, AllocationScheme::kSuperGroup);
    const auto y = mp_matmul(quantize_matrix(w, plan, cfg), quantize_activations(x, cfg));
    const auto f = fake_quant_forward(w, x, plan, cfg, 8);
    CHECK(matrix_rel_err(y, f) <= 1e-5);
  }
}

TEST_CASE("result does not depend on threads") {
  SeededRng rng(4);
  const auto c = random_case(37, 50, 9, 8, rng);
  const auto one = mp_matmul(c.wq, c.xq, 1);
  for (unsigned t : {2u, 3u, 16u}) CHECK(mp_matmul(c.wq, c.xq, t) == one);
}

TEST_CASE("doubling activation scales doubles the output exactly") {
  SeededRng rng(5);
  const auto c = random_case(9, 24, 5, 8, rng);
  std::vector<float> doubled = c.xq.scales();
  for (auto& s : doubled) s *= 2.0f;
  const QuantizedGroupMatrix x2(c.xq.rows(), c.xq.cols(), GroupAxis::kColumns, c.xq.config(), c.xq.lane_modes(),
                                c.xq.codes(), doubled);
  const auto y = mp_matmul(c.wq, c.xq);
  const auto y2 = mp_matmul(c.wq, x2);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y2.data()[i] == 2.0f * y.data()[i]);
}

TEST_CASE("operand checks") {
  SeededRng rng(6);
  const auto a = random_case(4, 8, 3, 4, rng);
  const auto b = random_case(4, 12, 3, 4, rng);
  CHECK_THROWS_AS(mp_matmul(a.wq, b.xq), InputError);
  const auto c = random_case(4, 8, 3, 8, rng);
  CHECK_THROWS_AS(mp_matmul(a.wq, c.xq), InputError);
  CHECK_THROWS_AS(mp_matmul(a.xq, a.wq), InputError);
  CHECK_THROWS_AS(check_activation_bits(4), InputError);
  const GroupQuantConfig cfg{4, 2.0, 1e-5};
  const auto plan = build_plan(3, 0.5, AllocationScheme::kSuperGroup);
  CHECK_THROWS_AS(fake_quant_forward(test::random_matrix(3, 4, rng), test::random_matrix(5, 2, rng), plan, cfg),
                  InputError);
  CHECK_THROWS_AS(fake_quant_forward(test::random_matrix(3, 4, rng), test::random_matrix(4, 2, rng), plan, cfg, 4),
                  InputError);
}

TEST_CASE("fake_quant_forward: representable weights, zero input") {
  const GroupQuantConfig cfg{4, 2.0, 1e-5};
  const float s = 0.5f;
  const auto w = DenseMatrix::from_rows({{7 * s, -2 * s, 0, 3 * s}, {s, 0, -s, 0}});
  const auto plan = build_plan(2, 0.5, AllocationScheme::kSuperGroup);
  SeededRng rng(7);
  const auto x = test::random_matrix(4, 6, rng);
  CHECK(fake_quant_forward(w, x, plan, cfg) == matmul(w, x));
  CHECK(fake_quant_forward(w, DenseMatrix(4, 6), plan, cfg) == DenseMatrix(2, 6));
}

TEST_CASE("Int8 activations move the output by at most the propagated round-off") {
  SeededRng rng(8);
  const GroupQuantConfig cfg{8, 2.0, 1e-5};
  for (int trial = 0; trial < 20; ++trial) {
    const auto w = test::random_matrix<double>(6, 20, rng);
    const auto x = test::random_matrix<double>(20, 7, rng);
    const auto plan = build_plan(6, 0.5, AllocationScheme::kSuperGroup);
    const auto y16 = fake_quant_forward(w, x, plan, cfg, 16);
    const auto y8 = fake_quant_forward(w, x, plan, cfg, 8);
    const auto wq = fake_quantize(w, plan, cfg);
    const auto xq = quantize_activations(x, cfg);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t l = 0; l < 7; ++l) {
        // half a step, plus |q| <= 127 times the 16-bit scale rounding (< 2^-11 relative)
        double bound = 0.0;
        for (std::size_t j = 0; j < 20; ++j) {
          const float s = xq.scale(l, j / 8);
          const double step = std::abs(x(j, l) - s * xq.code_at(j, l));
          CHECK(step <= s * (0.5 + 127.0 * std::ldexp(1.0, -11)) * (1 + 1e-6));
          bound += std::abs(wq(i, j)) * step;
        }
        CHECK(std::abs(y16(i, l) - y8(i, l)) <= bound + 1e-12);
      }
  }
}

TEST_CASE("ste_backward") {
  SeededRng rng(9);
  const GroupQuantConfig cfg{4, 2.0, 1e-5};
  const auto plan = build_plan(4, 0.25, AllocationScheme::kSuperGroup);
  const auto w = test::random_matrix<double>(4, 4, rng);
  const auto x = test::random_matrix<double>(4, 4, rng);

  SUBCASE("zero upstream gradient") {
    const auto g = ste_backward(MatrixD(4, 4), w, x, plan, cfg);
    CHECK(g.dw == MatrixD(4, 4));
    CHECK(g.dx == MatrixD(4, 4));
  }
  SUBCASE("half squared norm: dW = Y X^T, dX = Wq^T Y") {
    for (int bits : {16, 8}) {
      const auto y = fake_quant_forward(w, x, plan, cfg, bits);
      const auto g = ste_backward(y, w, x, plan, cfg, bits);
      const auto wq = fake_quantize(w, plan, cfg);
      const auto xa = bits == 8 ? fake_quantize_activations(x, cfg) : x;
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
          double dw = 0.0, dx = 0.0;
          for (std::size_t l = 0; l < 4; ++l) {
            dw += y(i, l) * xa(j, l);
            dx += wq(l, i) * y(l, j);
          }
          CHECK(g.dw(i, j) == doctest::Approx(dw).epsilon(1e-12));
          CHECK(g.dx(i, j) == doctest::Approx(dx).epsilon(1e-12));
        }
    }
  }
  SUBCASE("representable weights: exact gradient") {
    const double s = 0.25;
    const auto wr = MatrixD::from_rows({{7 * s, 1 * s, -2 * s, 0},
                                        {s, -s, 0, 0},
                                        {0, s, s, 0},
                                        {-s, 0, 0, s}});
    REQUIRE(fake_quantize(wr, plan, cfg) == wr);
    const auto dy = test::random_matrix<double>(4, 4, rng);
    const auto g = ste_backward(dy, wr, x, plan, cfg);
    CHECK(g.dw == matmul_nt(dy, x));
    CHECK(g.dx == matmul_tn(wr, dy));
  }
  SUBCASE("dX matches finite differences through the unquantized input") {
    const auto loss = [&](const MatrixD& xx) {
      const auto y = fake_quant_forward(w, xx, plan, cfg, 16);
      double l = 0.0;
      for (double v : y.data()) l += 0.5 * v * v + std::sin(v);
      return l;
    };
    auto y = fake_quant_forward(w, x, plan, cfg, 16);
    MatrixD dy(4, 4);
    for (std::size_t i = 0; i < dy.size(); ++i) dy.data()[i] = y.data()[i] + std::cos(y.data()[i]);
    const auto g = ste_backward(dy, w, x, plan, cfg, 16);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
      MatrixD xp = x, xm = x;
      xp.data()[i] += h;
      xm.data()[i] -= h;
      const double fd = (loss(xp) - loss(xm)) / (2 * h);
      CHECK(test::rel_diff(g.dx.data()[i], fd) <= 1e-4);
    }
  }
  CHECK_THROWS_AS(ste_backward(MatrixD(3, 4), w, x, plan, cfg), InputError);
}
