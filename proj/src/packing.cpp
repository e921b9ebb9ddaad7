// SPDX-License-Identifier: Apache-2.0

#include "razorq/packing.hpp"

#include <array>

#include "razorq/byte_io.hpp"
#include "razorq/half.hpp"
#include "razorq/tensor_io.hpp"

namespace razorq {

namespace {

constexpr std::array<int, 5> kPow3 = {1, 3, 9, 27, 81};
constexpr int kMaxTritByte = 242;

PackFormat format_for(BitMode m) {
  switch (m) {
    case BitMode::kTernary: return PackFormat::kTernaryPack;
    case BitMode::kInt4: return PackFormat::kNibblePack;
    case BitMode::kInt8: return PackFormat::kBytePack;
  }
  throw InvariantError("unknown BitMode");
}

PackFormat blob_format(std::span<const BitMode> modes) {
  ensure(!modes.empty(), "blob has no lanes");
  const PackFormat first = format_for(modes.front());
  for (BitMode m : modes)
    if (format_for(m) != first) return PackFormat::kMixed;
  return first;
}

void pack_lane(std::span<const std::int8_t> codes, BitMode mode, std::vector<std::uint8_t>& out) {
  switch (mode) {
    case BitMode::kTernary:
      for (std::size_t i = 0; i < codes.size(); i += 5)
        out.push_back(pack_trits(codes.subspan(i, std::min<std::size_t>(5, codes.size() - i))));
      break;
    case BitMode::kInt4:
      for (std::size_t i = 0; i < codes.size(); i += 2) {
        const std::uint8_t lo = static_cast<std::uint8_t>(codes[i] + 8);
        const std::uint8_t hi = i + 1 < codes.size() ? static_cast<std::uint8_t>(codes[i + 1] + 8) : 0;
        out.push_back(static_cast<std::uint8_t>(lo | (hi << 4)));
      }
      break;
    case BitMode::kInt8:
      for (std::int8_t c : codes) out.push_back(static_cast<std::uint8_t>(c));
      break;
  }
}

void unpack_lane(std::span<const std::uint8_t> bytes, BitMode mode, std::size_t length, std::int8_t* out) {
  switch (mode) {
    case BitMode::kTernary:
      for (std::size_t b = 0; b < bytes.size(); ++b) {
        int v = bytes[b];
        if (v > kMaxTritByte) throw InputError("ternary byte " + std::to_string(v) + " exceeds 242");
        for (std::size_t k = 0; k < 5; ++k) {
          const int trit = v % 3;
          v /= 3;
          const std::size_t i = b * 5 + k;
          if (i < length)
            out[i] = static_cast<std::int8_t>(trit - 1);
          else if (trit != 1)
            throw InputError("ternary padding trit is not the zero code");
        }
      }
      break;
    case BitMode::kInt4:
      for (std::size_t b = 0; b < bytes.size(); ++b) {
        const int nibbles[2] = {bytes[b] & 0x0F, bytes[b] >> 4};
        for (std::size_t k = 0; k < 2; ++k) {
          const std::size_t i = b * 2 + k;
          if (i < length) {
            if (nibbles[k] == 0) throw InputError("nibble value 0 is reserved for padding");
            out[i] = static_cast<std::int8_t>(nibbles[k] - 8);
          } else if (nibbles[k] != 0) {
            throw InputError("nibble padding is not zero");
          }
        }
      }
      break;
    case BitMode::kInt8:
      for (std::size_t i = 0; i < length; ++i) {
        const auto c = static_cast<std::int8_t>(bytes[i]);
        if (c == -128) throw InputError("int8 code -128 is outside the symmetric range");
        out[i] = c;
      }
      break;
  }
}

}  // namespace

std::string to_string(PackFormat f) {
  switch (f) {
    case PackFormat::kTernaryPack: return "ternary_pack";
    case PackFormat::kNibblePack: return "nibble_pack";
    case PackFormat::kBytePack: return "byte_pack";
    case PackFormat::kMixed: return "mixed";
  }
  throw InvariantError("unknown PackFormat");
}

std::size_t packed_lane_bytes(BitMode mode, std::size_t length) {
  switch (mode) {
    case BitMode::kTernary: return (length + 4) / 5;
    case BitMode::kInt4: return (length + 1) / 2;
    case BitMode::kInt8: return length;
  }
  throw InvariantError("unknown BitMode");
}

std::uint64_t modes_digest(std::span<const BitMode> modes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (BitMode m : modes) {
    h ^= static_cast<std::uint8_t>(m);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint8_t pack_trits(std::span<const std::int8_t> codes) {
  require(codes.size() <= 5, "at most five trits fit in a byte");
  int v = 0;
  for (std::size_t k = 0; k < 5; ++k) {
    const int c = k < codes.size() ? codes[k] : 0;
    require(c >= -1 && c <= 1, "ternary code out of range");
    v += (c + 1) * kPow3[k];
  }
  return static_cast<std::uint8_t>(v);
}

std::uint8_t pack_nibbles(std::int8_t low, std::int8_t high) {
  require(low >= -7 && low <= 7 && high >= -7 && high <= 7, "int4 code out of range");
  return static_cast<std::uint8_t>((low + 8) | ((high + 8) << 4));
}

double PackedBlob::physical_bits_per_weight() const {
  const double weights = static_cast<double>(rows) * static_cast<double>(cols);
  return (8.0 * static_cast<double>(payload.size()) + 16.0 * static_cast<double>(scales.size())) / weights;
}

PackedBlob pack(const QuantizedGroupMatrix& q) {
  PackedBlob b;
  b.rows = q.rows();
  b.cols = q.cols();
  b.group_size = static_cast<std::uint32_t>(q.config().group_size);
  b.beta = q.config().beta;
  b.epsilon = q.config().epsilon;
  b.axis = q.axis();
  b.lane_modes = q.lane_modes();
  b.modes_digest = modes_digest(b.lane_modes);
  b.format = blob_format(b.lane_modes);
  for (std::size_t lane = 0; lane < q.lanes(); ++lane) {
    const int lim = code_limit(q.lane_mode(lane));
    for (std::int8_t c : q.lane_codes(lane))
      require(c >= -lim && c <= lim, "code out of range for " + to_string(q.lane_mode(lane)));
    pack_lane(q.lane_codes(lane), q.lane_mode(lane), b.payload);
  }
  b.scales.reserve(q.scales().size());
  for (float s : q.scales()) b.scales.push_back(half::to_bits(s));
  return b;
}

QuantizedGroupMatrix unpack(const PackedBlob& b) {
  require(b.modes_digest == modes_digest(b.lane_modes), "lane mode digest mismatch");
  require(b.format == blob_format(b.lane_modes), "blob format does not match its lane modes");
  require(b.group_size >= 1, "blob group size is zero");
  const std::size_t lanes = b.axis == GroupAxis::kRows ? b.rows : b.cols;
  const std::size_t length = b.axis == GroupAxis::kRows ? b.cols : b.rows;
  require(b.lane_modes.size() == lanes, "blob lane count does not match its shape");

  std::size_t expected = 0;
  for (BitMode m : b.lane_modes) expected += packed_lane_bytes(m, length);
  require(b.payload.size() == expected, "payload is " + std::to_string(b.payload.size()) + " bytes, expected " +
                                            std::to_string(expected));
  const std::size_t groups = (length + b.group_size - 1) / b.group_size;
  require(b.scales.size() == lanes * groups, "scale count does not match the group layout");

  std::vector<std::int8_t> codes(lanes * length);
  std::size_t offset = 0;
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    const std::size_t n = packed_lane_bytes(b.lane_modes[lane], length);
    unpack_lane(std::span(b.payload).subspan(offset, n), b.lane_modes[lane], length, codes.data() + lane * length);
    offset += n;
  }
  std::vector<float> scales;
  scales.reserve(b.scales.size());
  for (auto bits : b.scales) scales.push_back(half::from_bits(bits));

  GroupQuantConfig config{b.group_size, b.beta, b.epsilon};
  return QuantizedGroupMatrix(b.rows, b.cols, b.axis, config, b.lane_modes, std::move(codes), std::move(scales));
}

std::vector<std::uint8_t> serialize_blob(const PackedBlob& b) {
  ByteWriter w;
  w.text(kPackedMagic);
  w.put<std::uint32_t>(kPackedVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(b.format));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(b.axis));
  w.put<std::uint16_t>(0);
  w.put<std::uint64_t>(b.rows);
  w.put<std::uint64_t>(b.cols);
  w.put<std::uint32_t>(b.group_size);
  w.put<std::uint32_t>(0);
  w.put<double>(b.beta);
  w.put<double>(b.epsilon);
  w.put<std::uint64_t>(b.modes_digest);
  for (BitMode m : b.lane_modes) w.put<std::uint8_t>(static_cast<std::uint8_t>(m));
  w.put<std::uint64_t>(b.payload.size());
  w.bytes(b.payload);
  w.put<std::uint64_t>(b.scales.size());
  for (auto s : b.scales) w.put<std::uint16_t>(s);
  return w.take();
}

PackedBlob parse_blob(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.take(kPackedMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kPackedMagic.begin()))
    throw InputError("not a packed blob: bad magic");
  const auto version = r.get<std::uint32_t>("version");
  require(version == kPackedVersion, "unsupported packed blob version " + std::to_string(version));

  PackedBlob b;
  const auto format = r.get<std::uint8_t>("format");
  require(format <= 3, "unknown pack format " + std::to_string(format));
  b.format = static_cast<PackFormat>(format);
  const auto axis = r.get<std::uint8_t>("axis");
  require(axis <= 1, "unknown group axis " + std::to_string(axis));
  b.axis = static_cast<GroupAxis>(axis);
  require(r.get<std::uint16_t>("reserved") == 0, "reserved header field is not zero");
  b.rows = r.get<std::uint64_t>("rows");
  b.cols = r.get<std::uint64_t>("cols");
  b.group_size = r.get<std::uint32_t>("group size");
  require(r.get<std::uint32_t>("reserved") == 0, "reserved header field is not zero");
  b.beta = r.get<double>("beta");
  b.epsilon = r.get<double>("epsilon");
  b.modes_digest = r.get<std::uint64_t>("mode digest");

  const std::uint64_t lanes = b.axis == GroupAxis::kRows ? b.rows : b.cols;
  require(lanes <= r.remaining(), "truncated input while reading lane modes");
  for (std::uint64_t i = 0; i < lanes; ++i) {
    const auto m = r.get<std::uint8_t>("lane modes");
    require(m <= 2, "unknown lane bit mode " + std::to_string(m));
    b.lane_modes.push_back(static_cast<BitMode>(m));
  }
  const auto payload_len = r.get<std::uint64_t>("payload length");
  const auto payload = r.take(payload_len, "payload");
  b.payload.assign(payload.begin(), payload.end());
  const auto scale_count = r.get<std::uint64_t>("scale count");
  require(scale_count <= r.remaining() / 2, "truncated input while reading scales");
  b.scales.resize(scale_count);
  for (auto& s : b.scales) s = r.get<std::uint16_t>("scales");
  require(r.remaining() == 0, "trailing bytes after packed blob");
  unpack(b);  // full structural validation
  return b;
}

void write_blob(const std::filesystem::path& path, const PackedBlob& b) {
  write_file_atomic(path, serialize_blob(b));
}

PackedBlob read_blob(const std::filesystem::path& path) { return parse_blob(read_file_bytes(path)); }

}  // namespace razorq
