// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "melvc/types.hpp"

namespace melvc {

/// MVF1 tensor record:
///   "MVF1" | dtype u8 (0 = f32 LE) | ndim u8 | 2 reserved zero bytes |
///   ndim x u32 LE dims | row-major f32 LE payload.
struct TensorF32 {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t element_count() const;
  bool operator==(const TensorF32&) const = default;
};

inline constexpr std::size_t kMaxTensorRank = 8;

std::vector<std::byte> serialize_tensor(const TensorF32& t);
void append_tensor(std::vector<std::byte>& out, const TensorF32& t);

/// Parses one record starting at `offset` and advances it past the record.
/// Throws FormatError on a bad magic, dtype, reserved bytes, rank, or truncated payload.
TensorF32 parse_tensor(std::span<const std::byte> bytes, std::size_t& offset);
/// Parses a buffer holding exactly one record.
TensorF32 parse_tensor(std::span<const std::byte> bytes);

void save_tensor(const std::filesystem::path& path, const TensorF32& t);
TensorF32 load_tensor(const std::filesystem::path& path);

TensorF32 from_matrix(const Matrix& m);
/// 2-D tensors map to rows x cols, 1-D to a single row. Other ranks throw FormatError.
Matrix to_matrix(const TensorF32& t);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes);

}  // namespace melvc
