// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact storage for quantized matrices.
//
// Each lane (row, for weights) is packed on its own and padded to a byte:
//
//   ternary  5 codes per byte, byte = sum_k (code_k + 1) * 3^k, k = 0..4
//            (range 0..242); tail padded with code 0 (trit 1)
//   int4     2 codes per byte, low nibble first, nibble = code + 8 (1..15);
//            a padding nibble is 0
//   int8     1 two's-complement byte per code (-127..127)
//
// Scales follow the codes as binary16 bit patterns, lane-major.
// The file layout is documented in docs/formats.md.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "razorq/quantizer.hpp"

namespace razorq {

inline constexpr std::string_view kPackedMagic = "RZRQPAKD";
inline constexpr std::uint32_t kPackedVersion = 1;

enum class PackFormat : std::uint8_t {
  kTernaryPack = 0,
  kNibblePack = 1,
  kBytePack = 2,
  kMixed = 3,  ///< lanes use more than one of the above
};

std::string to_string(PackFormat f);

struct PackedBlob {
  PackFormat format = PackFormat::kTernaryPack;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint32_t group_size = 0;
  double beta = 0.0;
  double epsilon = 0.0;
  GroupAxis axis = GroupAxis::kRows;
  std::vector<BitMode> lane_modes;
  std::uint64_t modes_digest = 0;
  std::vector<std::uint8_t> payload;
  std::vector<std::uint16_t> scales;

  std::size_t lanes() const { return lane_modes.size(); }
  /// Payload plus 16-bit scales, in bits per weight. Header bytes excluded.
  double physical_bits_per_weight() const;

  friend bool operator==(const PackedBlob&, const PackedBlob&) = default;
};

/// Bytes one packed lane of `length` codes occupies.
std::size_t packed_lane_bytes(BitMode mode, std::size_t length);

/// FNV-1a 64 over the lane mode bytes.
std::uint64_t modes_digest(std::span<const BitMode> modes);

std::uint8_t pack_trits(std::span<const std::int8_t> codes);  // up to 5 codes
std::uint8_t pack_nibbles(std::int8_t low, std::int8_t high);

PackedBlob pack(const QuantizedGroupMatrix& q);
QuantizedGroupMatrix unpack(const PackedBlob& b);

std::vector<std::uint8_t> serialize_blob(const PackedBlob& b);
PackedBlob parse_blob(std::span<const std::uint8_t> bytes);

void write_blob(const std::filesystem::path& path, const PackedBlob& b);
PackedBlob read_blob(const std::filesystem::path& path);

}  // namespace razorq
