// SPDX-License-Identifier: Apache-2.0
#include "melvc/checkpoint.hpp"

#include <cstring>
#include <set>

#include "melvc/errors.hpp"

#include <json.hpp>

namespace melvc {

namespace {

constexpr char kMagic[4] = {'M', 'V', 'C', '1'};

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
}

void put_u16(std::vector<std::byte>& out, std::uint16_t v) {
  out.push_back(static_cast<std::byte>(v & 0xffu));
  out.push_back(static_cast<std::byte>(v >> 8));
}

void put_text(std::vector<std::byte>& out, std::string_view s) {
  for (char c : s) out.push_back(static_cast<std::byte>(c));
}

std::uint32_t get_u32(std::span<const std::byte> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

std::uint16_t get_u16(std::span<const std::byte> b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[off]) | (static_cast<std::uint16_t>(b[off + 1]) << 8));
}

void put_name(std::vector<std::byte>& out, const std::string& name) {
  if (name.size() > 0xffff) throw FormatError("checkpoint entry name too long");
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  put_text(out, name);
}

}  // namespace

const TensorF32* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt) {
  std::set<std::string> seen;
  for (const auto& [name, t] : ckpt.tensors) {
    if (name == kMetadataEntry) throw FormatError("tensor entry may not be named meta.json");
    if (!seen.insert(name).second) throw FormatError("duplicate checkpoint entry: " + name);
  }
  const std::size_t count = ckpt.tensors.size() + (ckpt.metadata.empty() ? 0 : 1);
  if (count > 0xffffffffu) throw FormatError("too many checkpoint entries");
  std::vector<std::byte> out;
  put_text(out, std::string_view(kMagic, 4));
  put_u32(out, static_cast<std::uint32_t>(count));
  for (const auto& [name, t] : ckpt.tensors) {
    put_name(out, name);
    append_tensor(out, t);
  }
  if (!ckpt.metadata.empty()) {
    put_name(out, kMetadataEntry);
    if (ckpt.metadata.size() > 0xffffffffu) throw FormatError("metadata too large");
    put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
    put_text(out, ckpt.metadata);
  }
  return out;
}

Checkpoint parse_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad MVC1 magic");
  const std::uint32_t count = get_u32(bytes, 4);
  std::size_t pos = 8;
  Checkpoint ckpt;
  std::set<std::string> seen;
  bool have_meta = false;
  for (std::uint32_t e = 0; e < count; ++e) {
    if (bytes.size() - pos < 2) throw FormatError("truncated MVC1 entry name length");
    const std::size_t len = get_u16(bytes, pos);
    pos += 2;
    if (bytes.size() - pos < len) throw FormatError("truncated MVC1 entry name");
    std::string name(reinterpret_cast<const char*>(bytes.data() + pos), len);
    pos += len;
    if (!seen.insert(name).second) throw FormatError("duplicate checkpoint entry: " + name);
    if (name == kMetadataEntry) {
      if (bytes.size() - pos < 4) throw FormatError("truncated metadata length");
      const std::size_t mlen = get_u32(bytes, pos);
      pos += 4;
      if (bytes.size() - pos < mlen) throw FormatError("truncated metadata");
      ckpt.metadata.assign(reinterpret_cast<const char*>(bytes.data() + pos), mlen);
      pos += mlen;
      have_meta = true;
    } else {
      TensorF32 t = parse_tensor(bytes, pos);
      ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after MVC1 entries");
  if (have_meta && ckpt.metadata.empty()) throw FormatError("empty metadata entry");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_bytes(path, serialize_checkpoint(ckpt));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<std::string>& expected_config_hash) {
  LoadedCheckpoint out;
  out.checkpoint = parse_checkpoint(read_file_bytes(path));
  if (expected_config_hash) {
    std::string stored;
    if (!out.checkpoint.metadata.empty()) {
      const auto meta = nlohmann::json::parse(out.checkpoint.metadata, nullptr, false);
      if (meta.is_object() && meta.contains("config_hash") && meta["config_hash"].is_string())
        stored = meta["config_hash"].get<std::string>();
    }
    if (stored != *expected_config_hash)
      out.warnings.push_back("config hash mismatch: checkpoint has '" + stored + "', expected '" +
                             *expected_config_hash + "'");
  }
  return out;
}

void add_parameters(Checkpoint& ckpt, const nn::ParameterSet& params, const std::string& prefix) {
  for (const auto& p : params) ckpt.tensors.emplace_back(prefix + p.name, from_matrix(p.value));
}

void restore_parameters(nn::ParameterSet& params, const Checkpoint& ckpt, const std::string& prefix) {
  for (auto& p : params) {
    const TensorF32* t = ckpt.find(prefix + p.name);
    if (t == nullptr) throw FormatError("checkpoint is missing parameter " + prefix + p.name);
    Matrix m = to_matrix(*t);
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols())
      throw FormatError("shape mismatch for parameter " + prefix + p.name);
    p.value = std::move(m);
  }
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace melvc
