// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte writer/reader used by the on-disk formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "razorq/core.hpp"

namespace razorq {

static_assert(std::endian::native == std::endian::little,
              "the on-disk formats are little-endian and this build assumes a little-endian host");

class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(std::string_view s) {
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf_.insert(buf_.end(), raw, raw + sizeof(T));
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> b) : buf_(b) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = buf_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n) throw InputError(std::string("truncated input while reading ") + what);
  }
  std::span<const std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace razorq
