// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>

#include "melvc/dsp.hpp"
#include "melvc/types.hpp"

namespace melvc {

/// Frame-synchronous content features standing in for ASR bottleneck output.
struct BottleneckFeatures {
  Matrix frames;  // T x D
  double hop_ms = 10.0;

  Index num_frames() const { return frames.rows(); }
  Index dim() const { return frames.cols(); }
};

inline constexpr int kDefaultBottleneckDim = 256;
inline constexpr int kBottleneckContext = 2;

/// Deterministic surrogate extractor: tanh(context(mel) * R), where context
/// stacks +-2 neighbouring frames (edges replicated) and R is a fixed random
/// projection drawn from `seed`.
class SurrogateBottleneck {
 public:
  SurrogateBottleneck(Index n_mels, Index dim, std::uint64_t seed);

  BottleneckFeatures extract(const MelSpectrogram& mel) const;
  const Matrix& projection() const { return projection_; }

 private:
  Index n_mels_;
  Matrix projection_;  // (5 * n_mels) x dim
};

BottleneckFeatures surrogate_bottleneck(const MelSpectrogram& mel, std::uint64_t seed, Index dim = kDefaultBottleneckDim);

/// Loads a T x D MVF1 tensor. Throws FormatError for a bad file or a tensor that is not 2-D.
/// Alignment with any paired audio is the caller's responsibility.
BottleneckFeatures load_bottleneck(const std::filesystem::path& path);
void save_bottleneck(const std::filesystem::path& path, const BottleneckFeatures& bn);

}  // namespace melvc
