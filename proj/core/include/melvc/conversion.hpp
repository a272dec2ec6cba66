// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "melvc/content.hpp"
#include "melvc/dsp.hpp"
#include "melvc/nn/adam.hpp"
#include "melvc/nn/layers.hpp"
#include "melvc/prosody.hpp"

namespace melvc {

/// Widths of the bottleneck -> mel sequence-to-sequence model. `full()` is the
/// reference configuration; `toy()` divides every width by four and keeps the
/// data dimensions (bn_dim, n_mels).
struct ConversionHyper {
  Index bn_dim = 256;
  Index n_mels = 80;
  Index encoder_prenet = 256;
  int bank_k = 16;
  Index bank_channels = 128;
  Index projection_channels = 128;
  int highway_layers = 4;
  Index encoder_gru = 128;
  Index attention_dim = 128;
  Index attention_rnn = 256;
  Index decoder_prenet = 256;
  Index decoder_rnn = 256;
  int decoder_layers = 2;
  int reduction_factor = 1;
  double dropout = 0.5;
  ProsodyHyper prosody;

  static ConversionHyper full() { return {}; }
  static ConversionHyper toy();

  Index encoder_dim() const { return 2 * encoder_gru; }
  Index bank_output_channels() const { return bank_k * bank_channels; }
};

/// Optional taps into encoder internals, for inspection and tests.
struct EncoderTrace {
  nn::Var bank;        // T x (K * bank_channels), before pooling
  nn::Var projection;  // T x projection_channels, after the residual add
};

struct DecodeOutput {
  nn::Var mel;          // T_dec x n_mels
  nn::Var stop_logits;  // T_dec x 1
  Matrix alignment;     // T_dec x T_enc
  std::vector<double> stop_probs;
  bool truncated = false;
};

/// Mean over decoder steps t of w[t, round(t * T_enc / T_dec)].
double alignment_diagonality(const Matrix& alignment);

class ConversionModel {
 public:
  ConversionModel(const ConversionHyper& hyper, std::uint64_t seed);

  const ConversionHyper& hyper() const { return hyper_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const ProsodyEncoder& prosody_encoder() const { return prosody_; }

  /// Pre-net then CBHG; T x bn_dim -> T x encoder_dim.
  nn::Var encode_content(nn::Graph& g, nn::Var bn, EncoderTrace* trace = nullptr);

  /// Concatenates the prosody vector to every encoder state and projects back to encoder_dim.
  nn::Var condition_memory(nn::Graph& g, nn::Var encoded, nn::Var prosody);

  nn::Var prosody_embedding(nn::Graph& g, nn::Var mel);

  nn::AttentionLayer::Step attention_step(nn::Graph& g, nn::Var query, nn::Var memory, nn::Var keys);
  nn::Var attention_keys(nn::Graph& g, nn::Var memory);

  /// Teacher-forced when `teacher` is given (exactly teacher.rows() steps), otherwise
  /// free-running until a stop probability exceeds 0.5 or `max_steps` is reached.
  DecodeOutput decode_mel(nn::Graph& g, nn::Var memory, const Matrix* teacher, int max_steps = 0);

 private:
  ConversionHyper hyper_;
  nn::ParameterSet params_;

  nn::DenseLayer enc_prenet1_, enc_prenet2_;
  std::vector<nn::Conv1dLayer> bank_;
  nn::SequenceNormLayer bank_norm_;
  nn::Conv1dLayer proj1_, proj2_;
  nn::SequenceNormLayer proj1_norm_, proj2_norm_;
  nn::DenseLayer residual_proj_;
  std::vector<nn::HighwayLayer> highways_;
  nn::GruLayer enc_forward_, enc_backward_;

  ProsodyEncoder prosody_;
  nn::DenseLayer memory_proj_;

  nn::DenseLayer dec_prenet1_, dec_prenet2_;
  nn::GruLayer attention_rnn_;
  nn::AttentionLayer attention_;
  nn::DenseLayer decoder_input_;
  std::vector<nn::GruLayer> decoder_rnns_;
  nn::DenseLayer mel_out_;
  nn::DenseLayer stop_out_;
};

struct ConversionExample {
  BottleneckFeatures bn;
  MelSpectrogram mel;
  /// When absent, the prosody embedding is computed from `mel` by the model's reference encoder.
  std::optional<RowVector> prosody;
  std::string id;
};

struct ConversionStepResult {
  double loss = 0.0;  // mean over the batch of l1 + bce
  double l1 = 0.0;
  double bce = 0.0;
  double diagonality = 0.0;
};

/// Builds the teacher-forced loss for one example on `g`; returns the 1x1 loss Var.
nn::Var conversion_loss(nn::Graph& g, ConversionModel& model, const ConversionExample& ex,
                        ConversionStepResult* stats = nullptr);

class ConversionTrainer {
 public:
  ConversionTrainer(ConversionModel& model, nn::AdamConfig adam, std::uint64_t seed);

  /// One Adam update on the batch; returns the pre-update loss. Throws DivergedError
  /// (leaving parameters untouched) on a non-finite loss.
  ConversionStepResult train_step(std::span<const ConversionExample> batch);
  /// Teacher-forced loss in inference mode, without an update.
  ConversionStepResult evaluate(std::span<const ConversionExample> batch);

  std::int64_t steps() const { return optimizer_.steps(); }
  nn::Adam& optimizer() { return optimizer_; }

 private:
  ConversionModel& model_;
  nn::Adam optimizer_;
  std::uint64_t seed_;
};

struct ConversionOutput {
  MelSpectrogram mel;
  Matrix alignment;
  std::vector<double> stop_probs;
  bool truncated = false;
};

/// Free-running inference (dropout off). `max_steps` <= 0 uses
/// ceil(max_decoder_ratio * T_enc).
ConversionOutput convert(ConversionModel& model, const BottleneckFeatures& bn, const RowVector& prosody,
                         int max_steps = 0, double max_decoder_ratio = 2.0);

}  // namespace melvc
