// SPDX-License-Identifier: Apache-2.0

#include "razorq/tensor_io.hpp"

#include <fstream>
#include <limits>

#include "razorq/byte_io.hpp"

namespace razorq {

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (auto d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  require(t.data.size() == t.element_count(), "tensor data length does not match its shape");
  ByteWriter w;
  w.text(kTensorMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.put<std::uint64_t>(d);
  for (float v : t.data) w.put<float>(v);
  return w.take();
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto magic = r.take(kTensorMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kTensorMagic.begin()))
    throw InputError("not a tensor file: bad magic");
  Tensor t;
  const auto rank = r.get<std::uint32_t>("rank");
  require(rank <= 16, "tensor rank " + std::to_string(rank) + " is not supported");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = r.get<std::uint64_t>("dims");
    require(d == 0 || count <= std::numeric_limits<std::size_t>::max() / 8 / d,
            "tensor shape overflows");
    count *= static_cast<std::size_t>(d);
    t.shape.push_back(d);
  }
  if (r.remaining() != count * sizeof(float)) {
    throw InputError("tensor payload is " + std::to_string(r.remaining()) + " bytes, shape needs " +
                     std::to_string(count * sizeof(float)));
  }
  t.data.resize(count);
  for (auto& v : t.data) v = r.get<float>("payload");
  return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw InputError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file_bytes(path)); }

void write_tensor(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, encode_tensor(t));
}

Tensor to_tensor(const DenseMatrix& m) {
  return Tensor{{m.rows(), m.cols()}, m.values()};
}

DenseMatrix to_matrix(const Tensor& t) {
  require(t.shape.size() == 2, "expected a rank-2 tensor, got rank " + std::to_string(t.shape.size()));
  DenseMatrix m(t.shape[0], t.shape[1], t.data);
  require(m.all_finite(), "tensor contains non-finite values");
  return m;
}

DenseMatrix load_tensor_file(const std::filesystem::path& path) { return to_matrix(read_tensor(path)); }

void save_tensor_file(const std::filesystem::path& path, const DenseMatrix& m) {
  write_tensor(path, to_tensor(m));
}

}  // namespace razorq
