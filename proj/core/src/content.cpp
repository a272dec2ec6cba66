// SPDX-License-Identifier: Apache-2.0
#include "melvc/content.hpp"

#include <algorithm>
#include <cmath>

#include "melvc/errors.hpp"
#include "melvc/rng.hpp"
#include "melvc/tensor_file.hpp"

namespace melvc {

namespace {
// Keeps typical log-mel contexts (|m| ~ 5) out of deep tanh saturation.
constexpr double kProjectionGain = 0.25;
}  // namespace

SurrogateBottleneck::SurrogateBottleneck(Index n_mels, Index dim, std::uint64_t seed) : n_mels_(n_mels) {
  if (dim < 1) throw ParamError("bottleneck dimension must be >= 1");
  if (n_mels < 1) throw ParamError("n_mels must be >= 1");
  const Index context_dim = (2 * kBottleneckContext + 1) * n_mels;
  Rng rng(seed);
  const double scale = kProjectionGain / std::sqrt(static_cast<double>(context_dim));
  projection_.resize(context_dim, dim);
  for (Index i = 0; i < projection_.size(); ++i) projection_.data()[i] = scale * rng.normal();
}

BottleneckFeatures SurrogateBottleneck::extract(const MelSpectrogram& mel) const {
  if (mel.n_mels() != n_mels_) throw ParamError("mel band count does not match surrogate projection");
  const Index frames = mel.num_frames();
  BottleneckFeatures bn;
  bn.hop_ms = mel.hop_ms;
  if (frames == 0) {
    bn.frames.resize(0, projection_.cols());
    return bn;
  }
  Matrix context(frames, projection_.rows());
  for (Index t = 0; t < frames; ++t)
    for (int d = -kBottleneckContext; d <= kBottleneckContext; ++d) {
      const Index src = std::clamp<Index>(t + d, 0, frames - 1);
      context.block(t, (d + kBottleneckContext) * n_mels_, 1, n_mels_) = mel.frames.row(src);
    }
  bn.frames = (context * projection_).array().tanh().matrix();
  return bn;
}

BottleneckFeatures surrogate_bottleneck(const MelSpectrogram& mel, std::uint64_t seed, Index dim) {
  return SurrogateBottleneck(mel.n_mels(), dim, seed).extract(mel);
}

BottleneckFeatures load_bottleneck(const std::filesystem::path& path) {
  const TensorF32 t = load_tensor(path);
  if (t.dims.size() != 2) throw FormatError("bottleneck tensor must be 2-dimensional");
  BottleneckFeatures bn;
  bn.frames = to_matrix(t);
  return bn;
}

void save_bottleneck(const std::filesystem::path& path, const BottleneckFeatures& bn) {
  save_tensor(path, from_matrix(bn.frames));
}

}  // namespace melvc
