// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "melvc/audio_io.hpp"
#include "melvc/dsp.hpp"
#include "melvc/mel_lpc.hpp"
#include "melvc/nn/adam.hpp"
#include "melvc/nn/layers.hpp"

namespace melvc {

inline constexpr int kMulawLevels = 256;

struct VocoderHyper {
  Index n_mels = 80;
  Index cond_dim = 128;
  Index embed_dim = 64;
  Index gru_a = 64;
  Index gru_b = 16;

  static VocoderHyper full() { return {}; }
  /// Widths divided by four; n_mels kept.
  static VocoderHyper toy();
};

class VocoderModel {
 public:
  VocoderModel(const VocoderHyper& hyper, std::uint64_t seed);

  const VocoderHyper& hyper() const { return hyper_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// Frame-rate network; T x n_mels -> T x cond_dim. Edge frames are replicated
  /// before each conv so a constant input gives constant rows.
  nn::Var frame_condition(nn::Graph& g, nn::Var mel);
  Matrix frame_condition(const MelSpectrogram& mel);

  /// Teacher-forced logits over L samples. Code spans have length L; `frame_of`
  /// maps each sample onto a row of `cond`.
  nn::Var sample_logits(nn::Graph& g, nn::Var cond, std::span<const int> s_prev, std::span<const int> e_prev,
                        std::span<const int> p_code, std::span<const Index> frame_of);

 private:
  friend class SampleRunner;

  VocoderHyper hyper_;
  nn::ParameterSet params_;
  nn::Conv1dLayer conv1_, conv2_;
  nn::DenseLayer fc1_, fc2_;
  std::size_t embedding_ = 0;
  nn::GruLayer gru_a_, gru_b_;
  nn::DenseLayer dual1_, dual2_;
  std::size_t dual_scale1_ = 0, dual_scale2_ = 0;
};

/// Plain-matrix sample-rate network for inference, equivalent to `sample_logits`
/// followed by a softmax. Input-side projections of the embedding table and of
/// the conditioning are precomputed.
class SampleRunner {
 public:
  SampleRunner(const VocoderModel& model, const Matrix& cond);

  void reset();
  /// Distribution over the 256 excitation codes; advances the recurrent state.
  const RowVector& step(int s_prev, int e_prev, int p_code, Index frame);

 private:
  Index ha_, hb_;
  Matrix emb_s_, emb_e_, emb_p_;  // 256 x 3H_a
  Matrix cond_a_;                 // T x 3H_a (bias folded in)
  Matrix cond_b_;                 // T x 3H_b (bias folded in)
  Matrix wh_a_, wxb_h_, wh_b_;
  RowVector bh_a_, bh_b_;
  Matrix w1_, w2_;
  RowVector b1_, b2_, s1_, s2_;
  RowVector h_a_, h_b_, probs_;
};

enum class SynthesisMode { neural_sample, neural_argmax, copy };

struct SynthesisOptions {
  SynthesisMode mode = SynthesisMode::neural_sample;
  std::uint64_t seed = 0;
  /// Required in copy mode, at least T * hop samples.
  std::span<const double> excitation;
  /// Mel -> LPC analyzer; null selects the default front end.
  const MelLpcAnalyzer* analyzer = nullptr;
};

/// Output has T * hop samples at 16 kHz. The predictor comes from mel_to_lpc on
/// the default filterbank. `model` may be null in copy mode.
Waveform synthesize(const MelSpectrogram& mel, VocoderModel* model, const SynthesisOptions& options);

/// Excitation of `w` against the mel-derived predictor, first T * hop samples.
std::vector<double> vocoder_residual(const MelSpectrogram& mel, const Waveform& w,
                                     const MelLpcAnalyzer* analyzer = nullptr);

struct VocoderExample {
  MelSpectrogram mel;
  Waveform audio;
};

/// Teacher-forcing inputs and targets derived from one example.
struct VocoderTargets {
  std::vector<int> s_prev, e_prev, p_code, target;
  std::vector<Index> frame_of;
  std::size_t size() const { return target.size(); }
};

VocoderTargets vocoder_targets(const VocoderExample& ex, const MelLpcAnalyzer* analyzer = nullptr);

class VocoderTrainer {
 public:
  VocoderTrainer(VocoderModel& model, nn::AdamConfig adam, std::uint64_t seed, std::size_t chunk = 320,
                 const MelLpcAnalyzer* analyzer = nullptr);

  /// Adds an example; throws ShapeError when the audio is shorter than T * hop.
  void add_example(const VocoderExample& ex);
  std::size_t num_examples() const { return data_.size(); }

  /// Mean per-sample cross-entropy (nats) over one chunk per example, before the
  /// update. Chunk offsets are a pure function of (seed, step, example).
  double train_step();
  /// Same chunks as the next train_step, without update or gradient.
  double evaluate();
  /// Cross-entropy over every sample of every example.
  double full_loss();

  std::int64_t steps() const { return optimizer_.steps(); }
  nn::Adam& optimizer() { return optimizer_; }

 private:
  struct Prepared {
    Matrix mel;
    VocoderTargets targets;
  };
  double chunk_loss(nn::Graph& g, nn::Var* total, bool whole);

  VocoderModel& model_;
  nn::Adam optimizer_;
  std::uint64_t seed_;
  std::size_t chunk_;
  const MelLpcAnalyzer* analyzer_;
  std::vector<Prepared> data_;
};

}  // namespace melvc
