// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities.

#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "razorq/core.hpp"
#include "razorq/rng.hpp"

namespace razorq::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "razorq-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T = float>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, SeededRng& rng, double scale = 1.0) {
  Matrix<T> m(rows, cols);
  for (auto& v : m.data()) v = static_cast<T>(scale * rng.normal());
  return m;
}

/// Plain triple loop, double accumulation.
template <typename T>
Matrix<double> naive_matmul(const Matrix<T>& a, const Matrix<T>& b) {
  Matrix<double> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<double>(a(i, k)) * static_cast<double>(b(k, j));
      out(i, j) = s;
    }
  return out;
}

inline double rel_diff(double a, double b) {
  const double d = std::abs(a - b);
  const double m = std::max(std::abs(a), std::abs(b));
  return m == 0.0 ? d : d / m;
}

}  // namespace razorq::test
