// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "melvc/nn/params.hpp"
#include "melvc/tensor_file.hpp"

namespace melvc {

inline constexpr const char* kMetadataEntry = "meta.json";

/// MVC1 container:
///   "MVC1" | u32 LE entry count | per entry: u16 LE name length, UTF-8 name, body.
/// Bodies are MVF1 records, except the optional "meta.json" entry whose body is
/// a u32 LE byte length followed by UTF-8 JSON text.
struct Checkpoint {
  std::vector<std::pair<std::string, TensorF32>> tensors;
  std::string metadata;  // JSON text; empty means no metadata entry

  const TensorF32* find(const std::string& name) const;
};

struct LoadedCheckpoint {
  Checkpoint checkpoint;
  std::vector<std::string> warnings;
};

/// Throws FormatError on duplicate names or names longer than 65535 bytes.
std::vector<std::byte> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// When `expected_config_hash` is given and differs from the "config_hash"
/// field in the metadata, a warning is recorded and loading proceeds.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 const std::optional<std::string>& expected_config_hash = std::nullopt);

/// Appends every parameter of `params` as "<prefix><name>".
void add_parameters(Checkpoint& ckpt, const nn::ParameterSet& params, const std::string& prefix = "");
/// Copies "<prefix><name>" tensors into matching parameters. Throws FormatError
/// on a missing entry or shape mismatch.
void restore_parameters(nn::ParameterSet& params, const Checkpoint& ckpt, const std::string& prefix = "");

/// Hex FNV-1a 64 of a byte string; used for config hashes.
std::string fnv1a_hex(std::string_view text);

}  // namespace melvc
