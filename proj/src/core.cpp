// SPDX-License-Identifier: Apache-2.0

#include "razorq/core.hpp"

#include <thread>

namespace razorq {

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix<T> out(a.rows(), b.cols());
  std::vector<double> acc(b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      if (av == 0.0) continue;
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) acc[j] += av * static_cast<double>(brow[j]);
    }
    for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) = static_cast<T>(acc[j]);
  }
  return out;
}

template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  Matrix<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto brow = b.row(j);
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k)
        acc += static_cast<double>(arow[k]) * static_cast<double>(brow[k]);
      out(i, j) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b) {
  require(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  Matrix<double> acc(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      auto out = acc.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += av * static_cast<double>(brow[j]);
    }
  }
  return acc.template cast<T>();
}

template Matrix<float> matmul(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> matmul(const Matrix<double>&, const Matrix<double>&);
template Matrix<float> matmul_nt(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> matmul_nt(const Matrix<double>&, const Matrix<double>&);
template Matrix<float> matmul_tn(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> matmul_tn(const Matrix<double>&, const Matrix<double>&);

void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    fn(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t begin = 0; begin < n; begin += chunk) {
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace razorq
