// SPDX-License-Identifier: Apache-2.0
#include "melvc/tensor_file.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "melvc/errors.hpp"

namespace melvc {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'F', '1'};
constexpr std::size_t kHeaderBytes = 8;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::span<const std::byte> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t TensorF32::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void append_tensor(std::vector<std::byte>& out, const TensorF32& t) {
  if (t.dims.size() > kMaxTensorRank) throw FormatError("tensor rank exceeds " + std::to_string(kMaxTensorRank));
  if (t.element_count() != t.data.size()) throw FormatError("tensor payload does not match its dims");
  for (char c : kMagic) out.push_back(static_cast<std::byte>(c));
  out.push_back(std::byte{0});
  out.push_back(static_cast<std::byte>(t.dims.size()));
  out.push_back(std::byte{0});
  out.push_back(std::byte{0});
  for (auto d : t.dims) put_u32(out, d);
  for (float f : t.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put_u32(out, bits);
  }
}

std::vector<std::byte> serialize_tensor(const TensorF32& t) {
  std::vector<std::byte> out;
  out.reserve(kHeaderBytes + 4 * t.dims.size() + 4 * t.data.size());
  append_tensor(out, t);
  return out;
}

TensorF32 parse_tensor(std::span<const std::byte> bytes, std::size_t& offset) {
  if (offset > bytes.size() || bytes.size() - offset < kHeaderBytes) throw FormatError("truncated MVF1 header");
  const auto* p = bytes.data() + offset;
  if (std::memcmp(p, kMagic, 4) != 0) throw FormatError("bad MVF1 magic");
  if (p[4] != std::byte{0}) throw FormatError("unsupported MVF1 dtype code " + std::to_string(int(p[4])));
  const auto ndim = static_cast<std::size_t>(p[5]);
  if (p[6] != std::byte{0} || p[7] != std::byte{0}) throw FormatError("MVF1 reserved bytes must be zero");
  if (ndim > kMaxTensorRank) throw FormatError("MVF1 rank " + std::to_string(ndim) + " exceeds limit");
  std::size_t pos = offset + kHeaderBytes;
  if (bytes.size() - pos < 4 * ndim) throw FormatError("truncated MVF1 dims");
  TensorF32 t;
  t.dims.resize(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    t.dims[i] = get_u32(bytes, pos + 4 * i);
    if (t.dims[i] != 0 && count > std::numeric_limits<std::size_t>::max() / 4 / t.dims[i])
      throw FormatError("MVF1 dims overflow");
    count *= t.dims[i];
  }
  pos += 4 * ndim;
  if ((bytes.size() - pos) / 4 < count) throw FormatError("truncated MVF1 payload");
  t.data.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = get_u32(bytes, pos + 4 * i);
    std::memcpy(&t.data[i], &bits, sizeof(bits));
  }
  offset = pos + 4 * count;
  return t;
}

TensorF32 parse_tensor(std::span<const std::byte> bytes) {
  std::size_t offset = 0;
  TensorF32 t = parse_tensor(bytes, offset);
  if (offset != bytes.size()) throw FormatError("trailing bytes after MVF1 payload");
  return t;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::byte> out(raw.size());
  std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void save_tensor(const std::filesystem::path& path, const TensorF32& t) { write_file_bytes(path, serialize_tensor(t)); }

TensorF32 load_tensor(const std::filesystem::path& path) { return parse_tensor(read_file_bytes(path)); }

TensorF32 from_matrix(const Matrix& m) {
  TensorF32 t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) t.data[static_cast<std::size_t>(i)] = static_cast<float>(m.data()[i]);
  return t;
}

Matrix to_matrix(const TensorF32& t) {
  Index rows = 0, cols = 0;
  if (t.dims.size() == 2) {
    rows = t.dims[0];
    cols = t.dims[1];
  } else if (t.dims.size() == 1) {
    rows = 1;
    cols = t.dims[0];
  } else {
    throw FormatError("expected a 1-D or 2-D tensor");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(t.data[static_cast<std::size_t>(i)]);
  return m;
}

}  // namespace melvc
