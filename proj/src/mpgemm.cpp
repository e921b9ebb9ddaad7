// SPDX-License-Identifier: Apache-2.0

#include "razorq/mpgemm.hpp"

#include "razorq/kernels.hpp"

namespace razorq {

DenseMatrix mp_matmul(const QuantizedGroupMatrix& wq, const QuantizedGroupMatrix& xq, unsigned threads) {
  require(wq.axis() == GroupAxis::kRows, "weight operand must be grouped along rows");
  require(xq.axis() == GroupAxis::kColumns, "activation operand must be grouped down columns");
  require(wq.cols() == xq.rows(), "shape mismatch: W is " + std::to_string(wq.rows()) + "x" +
                                      std::to_string(wq.cols()) + ", X is " + std::to_string(xq.rows()) + "x" +
                                      std::to_string(xq.cols()));
  require(wq.config().group_size == xq.config().group_size, "W and X use different group sizes");

  const std::size_t groups = wq.groups_per_lane();
  DenseMatrix y(wq.rows(), xq.cols());
  parallel_for(wq.rows(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t l = 0; l < xq.cols(); ++l) {
        float acc = 0.0f;
        for (std::size_t g = 0; g < groups; ++g) {
          const auto a = wq.group_codes(i, g);
          const auto b = xq.group_codes(l, g);
          const std::int32_t dot = kernels::dot_i8(a.data(), b.data(), a.size());
          acc += (wq.scale(i, g) * xq.scale(l, g)) * static_cast<float>(dot);
        }
        y(i, l) = acc;
      }
    }
  });
  return y;
}

void check_activation_bits(int bits) {
  require(bits == 16 || bits == 8, "activation bits must be 16 or 8, got " + std::to_string(bits));
}

namespace {

template <typename T>
Matrix<T> activation_operand(const Matrix<T>& x, const GroupQuantConfig& config, int activation_bits) {
  check_activation_bits(activation_bits);
  return activation_bits == 8 ? fake_quantize_activations(x, config) : x;
}

template <typename T>
void check_shapes(const Matrix<T>& w, const Matrix<T>& x, const AllocationPlan& plan) {
  require(w.cols() == x.rows(), "shape mismatch: W has " + std::to_string(w.cols()) + " columns, X has " +
                                    std::to_string(x.rows()) + " rows");
  require(plan.rows == w.rows(), "allocation plan does not match the weight rows");
}

}  // namespace

template <typename T>
Matrix<T> fake_quant_forward(const Matrix<T>& w, const Matrix<T>& x, const AllocationPlan& plan,
                             const GroupQuantConfig& config, int activation_bits) {
  check_shapes(w, x, plan);
  return matmul(fake_quantize(w, plan, config), activation_operand(x, config, activation_bits));
}

template <typename T>
SteGradients<T> ste_backward(const Matrix<T>& dy, const Matrix<T>& w, const Matrix<T>& x, const AllocationPlan& plan,
                             const GroupQuantConfig& config, int activation_bits) {
  check_shapes(w, x, plan);
  require(dy.rows() == w.rows() && dy.cols() == x.cols(), "dY shape does not match the forward output");
  const Matrix<T> wq = fake_quantize(w, plan, config);
  const Matrix<T> xa = activation_operand(x, config, activation_bits);
  return {matmul_nt(dy, xa), matmul_tn(wq, dy)};
}

template Matrix<float> fake_quant_forward<float>(const Matrix<float>&, const Matrix<float>&, const AllocationPlan&,
                                                 const GroupQuantConfig&, int);
template Matrix<double> fake_quant_forward<double>(const Matrix<double>&, const Matrix<double>&,
                                                   const AllocationPlan&, const GroupQuantConfig&, int);
template SteGradients<float> ste_backward<float>(const Matrix<float>&, const Matrix<float>&, const Matrix<float>&,
                                                 const AllocationPlan&, const GroupQuantConfig&, int);
template SteGradients<double> ste_backward<double>(const Matrix<double>&, const Matrix<double>&,
                                                   const Matrix<double>&, const AllocationPlan&,
                                                   const GroupQuantConfig&, int);

}  // namespace razorq
