// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "melvc/dsp.hpp"
#include "melvc/nn/layers.hpp"

namespace melvc {

/// Fixed-length utterance style vector (tanh outputs).
struct ProsodyEmbedding {
  RowVector vector;
  std::string source_utterance;
};

struct ProsodyHyper {
  std::vector<Index> channels{32, 32, 64, 64, 128, 128};
  int kernel = 3;
  int stride = 2;
  Index gru_units = 128;
  Index embedding_dim = 128;
  Index n_mels = 80;
  /// Value used to pad the time axis up to a multiple of stride^layers (log of the mel floor).
  double pad_value = -11.512925464970229;

  static ProsodyHyper full() { return {}; }
  /// Every width divided by four.
  static ProsodyHyper toy();

  Index time_multiple() const;
};

/// Reference encoder: strided 2-D conv stack over the (time x mel) image, a GRU
/// across the remaining time steps, and a dense-tanh projection of its final state.
class ProsodyEncoder {
 public:
  ProsodyEncoder() = default;
  ProsodyEncoder(nn::ParameterSet& ps, const std::string& prefix, const ProsodyHyper& hyper, Rng& rng);

  const ProsodyHyper& hyper() const { return hyper_; }

  /// mel: T x n_mels (T >= 1) -> 1 x embedding_dim.
  nn::Var encode(nn::Graph& g, nn::ParameterSet& ps, nn::Var mel) const;

 private:
  ProsodyHyper hyper_;
  std::vector<nn::Conv2dLayer> convs_;
  nn::GruLayer gru_;
  nn::DenseLayer projection_;
};

/// Self-contained encoder with its own parameters, for standalone use.
class ReferenceEncoderModel {
 public:
  ReferenceEncoderModel(const ProsodyHyper& hyper, std::uint64_t seed);

  nn::ParameterSet& params() { return params_; }
  const ProsodyEncoder& encoder() const { return encoder_; }

  ProsodyEmbedding reference_encode(const MelSpectrogram& mel, std::string utterance_id = {});

 private:
  nn::ParameterSet params_;
  ProsodyEncoder encoder_;
};

/// Index minimizing the summed Euclidean distance to all others; ties go to
/// the smallest index. Throws ParamError on an empty list.
std::size_t select_medoid(std::span<const RowVector> embeddings);
std::size_t select_medoid(std::span<const ProsodyEmbedding> embeddings);

}  // namespace melvc
