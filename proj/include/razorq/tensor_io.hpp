// SPDX-License-Identifier: Apache-2.0
//
// Native tensor container:
//
//   offset 0   8 bytes   magic "RZRQTNSR"
//   offset 8   u32       rank
//   offset 12  u64[rank] dims, outermost first
//   then       f32[prod(dims)] values, row-major
//
// All integers and floats are little-endian. Nothing follows the payload.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "razorq/core.hpp"

namespace razorq {

inline constexpr std::string_view kTensorMagic = "RZRQTNSR";

/// Any-rank float tensor as stored in the container.
struct Tensor {
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::size_t element_count() const;
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t);

/// Loads a rank-2 tensor file. Non-finite values are rejected.
DenseMatrix load_tensor_file(const std::filesystem::path& path);
void save_tensor_file(const std::filesystem::path& path, const DenseMatrix& m);

Tensor to_tensor(const DenseMatrix& m);
DenseMatrix to_matrix(const Tensor& t);

// Whole-file helpers shared with the packed-blob format.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// Writes to `<path>.tmp` and renames over `path`, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace razorq
