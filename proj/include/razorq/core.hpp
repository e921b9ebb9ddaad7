// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices and the error types shared by every module.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace razorq {

/// Bad input: malformed files, out-of-range arguments, shape mismatches.
/// The CLI maps it to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal contract was violated. The CLI maps it to exit code 2.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

inline void ensure(bool cond, const std::string& msg) {
  if (!cond) throw InvariantError(msg);
}

/// Row-major dense matrix. `Matrix<float>` is the storage type used for files;
/// the training and loss code runs on `Matrix<double>`.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows_ * cols_, "matrix data length does not match shape");
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      require(row.size() == c, "ragged initializer for matrix");
      std::copy(row.begin(), row.end(), m.row(i++).begin());
    }
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
  }

  template <typename U>
  Matrix<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Matrix<U>(rows_, cols_, std::move(out));
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = Matrix<float>;
using MatrixD = Matrix<double>;

// Reference products. Accumulation is in double, ascending over the inner
// index, so results are reproducible for a given input.

/// A (m x k) * B (k x n)
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b);
/// A (m x k) * B^T, with B (n x k)
template <typename T>
Matrix<T> matmul_nt(const Matrix<T>& a, const Matrix<T>& b);
/// A^T * B, with A (k x m), B (k x n)
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b);

/// Largest absolute entry; 0 for an empty matrix.
template <typename T>
double max_abs(const Matrix<T>& m) {
  double best = 0.0;
  for (T v : m.data()) best = std::max(best, static_cast<double>(std::abs(v)));
  return best;
}

/// Runs fn(begin, end) over [0, n) split into at most `threads` contiguous
/// chunks. Each index is visited by exactly one chunk, so results do not
/// depend on the thread count when fn writes disjoint outputs.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace razorq
