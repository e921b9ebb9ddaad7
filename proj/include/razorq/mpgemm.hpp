// SPDX-License-Identifier: Apache-2.0
//
// Mixed-precision matrix multiply on integer codes, its fake-quant float
// reference, and the straight-through backward pass.

#pragma once

#include "razorq/core.hpp"
#include "razorq/layout.hpp"
#include "razorq/quantizer.hpp"

namespace razorq {

/// Y(i, l) = sum_j float(sW(i, j) * sX(j, l)) * dot(codes of W group (i, j), codes of X group (j, l))
///
/// Wq is grouped along rows (d_out x d_in), Xq down columns (d_in x tokens),
/// with the same group size. Each group dot is exact in int32; the sum over
/// groups runs in float in ascending group order, so the result does not
/// depend on `threads`.
DenseMatrix mp_matmul(const QuantizedGroupMatrix& wq, const QuantizedGroupMatrix& xq, unsigned threads = 1);

/// Throws InputError unless bits is 16 (activations kept in float) or 8.
void check_activation_bits(int bits);

/// matmul(fake_quantize(W), X), with X replaced by its Int8 fake-quant when
/// activation_bits == 8.
template <typename T>
Matrix<T> fake_quant_forward(const Matrix<T>& w, const Matrix<T>& x, const AllocationPlan& plan,
                             const GroupQuantConfig& config, int activation_bits = 16);

template <typename T>
struct SteGradients {
  Matrix<T> dw;
  Matrix<T> dx;
};

/// Gradients of a fake_quant_forward call with every quantizer treated as the
/// identity: dW = dY * Xa^T and dX = Wq^T * dY, where Wq and Xa are the
/// operands the forward pass actually multiplied. No clip mask, and scales get
/// no gradient.
template <typename T>
SteGradients<T> ste_backward(const Matrix<T>& dy, const Matrix<T>& w, const Matrix<T>& x, const AllocationPlan& plan,
                             const GroupQuantConfig& config, int activation_bits = 16);

}  // namespace razorq
