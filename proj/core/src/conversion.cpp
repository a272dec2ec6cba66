// SPDX-License-Identifier: Apache-2.0
#include "melvc/conversion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "melvc/errors.hpp"
#include "melvc/rng.hpp"

namespace melvc {

using nn::Activation;
using nn::Var;

ConversionHyper ConversionHyper::toy() {
  ConversionHyper h;
  h.encoder_prenet /= 4;
  h.bank_channels /= 4;
  h.projection_channels /= 4;
  h.encoder_gru /= 4;
  h.attention_dim /= 4;
  h.attention_rnn /= 4;
  h.decoder_prenet /= 4;
  h.decoder_rnn /= 4;
  h.prosody = ProsodyHyper::toy();
  return h;
}

double alignment_diagonality(const Matrix& alignment) {
  const Index t_dec = alignment.rows();
  const Index t_enc = alignment.cols();
  if (t_dec == 0 || t_enc == 0) return 0.0;
  double acc = 0.0;
  for (Index t = 0; t < t_dec; ++t) {
    const auto j = static_cast<Index>(std::llround(static_cast<double>(t) * t_enc / t_dec));
    acc += alignment(t, std::min(j, t_enc - 1));
  }
  return acc / static_cast<double>(t_dec);
}

ConversionModel::ConversionModel(const ConversionHyper& hyper, std::uint64_t seed) : hyper_(hyper) {
  if (hyper.reduction_factor != 1) throw ParamError("only reduction factor 1 is supported");
  if (hyper.prosody.n_mels != hyper.n_mels) throw ParamError("prosody encoder mel count must match the model");
  Rng rng(seed);
  auto& ps = params_;
  const auto& h = hyper_;

  enc_prenet1_ = nn::DenseLayer::create(ps, "encoder.prenet.0", h.bn_dim, h.encoder_prenet, Activation::relu, rng);
  enc_prenet2_ =
      nn::DenseLayer::create(ps, "encoder.prenet.1", h.encoder_prenet, h.encoder_prenet, Activation::relu, rng);
  for (int k = 1; k <= h.bank_k; ++k)
    bank_.push_back(
        nn::Conv1dLayer::create(ps, "encoder.bank." + std::to_string(k), k, h.encoder_prenet, h.bank_channels, rng));
  bank_norm_ = nn::SequenceNormLayer::create(ps, "encoder.bank.norm", h.bank_output_channels());
  proj1_ = nn::Conv1dLayer::create(ps, "encoder.proj.0", 3, h.bank_output_channels(), h.projection_channels, rng);
  proj2_ = nn::Conv1dLayer::create(ps, "encoder.proj.1", 3, h.projection_channels, h.projection_channels, rng);
  proj1_norm_ = nn::SequenceNormLayer::create(ps, "encoder.proj.0.norm", h.projection_channels);
  proj2_norm_ = nn::SequenceNormLayer::create(ps, "encoder.proj.1.norm", h.projection_channels);
  residual_proj_ = nn::DenseLayer::create(ps, "encoder.residual", h.encoder_prenet, h.projection_channels,
                                          Activation::linear, rng);
  for (int i = 0; i < h.highway_layers; ++i)
    highways_.push_back(nn::HighwayLayer::create(ps, "encoder.highway." + std::to_string(i), h.projection_channels, rng));
  enc_forward_ = nn::GruLayer::create(ps, "encoder.gru.fwd", h.projection_channels, h.encoder_gru, rng);
  enc_backward_ = nn::GruLayer::create(ps, "encoder.gru.bwd", h.projection_channels, h.encoder_gru, rng);

  prosody_ = ProsodyEncoder(ps, "prosody", h.prosody, rng);
  memory_proj_ = nn::DenseLayer::create(ps, "memory.proj", h.encoder_dim() + h.prosody.embedding_dim, h.encoder_dim(),
                                        Activation::linear, rng);

  dec_prenet1_ = nn::DenseLayer::create(ps, "decoder.prenet.0", h.n_mels, h.decoder_prenet, Activation::relu, rng);
  dec_prenet2_ =
      nn::DenseLayer::create(ps, "decoder.prenet.1", h.decoder_prenet, h.decoder_prenet, Activation::relu, rng);
  attention_rnn_ =
      nn::GruLayer::create(ps, "decoder.attention_rnn", h.decoder_prenet + h.encoder_dim(), h.attention_rnn, rng);
  attention_ = nn::AttentionLayer::create(ps, "decoder.attention", h.attention_rnn, h.encoder_dim(), h.attention_dim, rng);
  decoder_input_ = nn::DenseLayer::create(ps, "decoder.input", h.attention_rnn + h.encoder_dim(), h.decoder_rnn,
                                          Activation::linear, rng);
  for (int i = 0; i < h.decoder_layers; ++i)
    decoder_rnns_.push_back(
        nn::GruLayer::create(ps, "decoder.rnn." + std::to_string(i), h.decoder_rnn, h.decoder_rnn, rng));
  mel_out_ = nn::DenseLayer::create(ps, "decoder.mel", h.decoder_rnn + h.encoder_dim(), h.n_mels, Activation::linear,
                                    rng);
  stop_out_ =
      nn::DenseLayer::create(ps, "decoder.stop", h.decoder_rnn + h.encoder_dim(), 1, Activation::linear, rng);
}

Var ConversionModel::encode_content(nn::Graph& g, Var bn, EncoderTrace* trace) {
  if (bn.cols() != hyper_.bn_dim)
    throw ShapeError("bottleneck dim " + std::to_string(bn.cols()) + " does not match model " +
                     std::to_string(hyper_.bn_dim));
  if (bn.rows() < 1) throw ShapeError("encoder needs at least one frame");
  auto& ps = params_;
  Var x = nn::dropout(enc_prenet1_(g, ps, bn), hyper_.dropout);
  x = nn::dropout(enc_prenet2_(g, ps, x), hyper_.dropout);

  std::vector<Var> bank_out;
  bank_out.reserve(bank_.size());
  for (const auto& conv : bank_) bank_out.push_back(nn::relu(conv(g, ps, x, nn::Padding::same)));
  const Var bank = bank_norm_(g, ps, nn::concat_cols(bank_out));
  const Var pooled = nn::maxpool1d_same(bank, 2);
  const Var p1 = proj1_norm_(g, ps, nn::relu(proj1_(g, ps, pooled, nn::Padding::same)));
  const Var p2 = proj2_norm_(g, ps, proj2_(g, ps, p1, nn::Padding::same));
  Var y = nn::add(p2, residual_proj_(g, ps, x));
  if (trace != nullptr) {
    trace->bank = bank;
    trace->projection = y;
  }
  for (const auto& hw : highways_) y = hw(g, ps, y);
  const Var fwd = enc_forward_.run(g, ps, y, false);
  const Var bwd = enc_backward_.run(g, ps, y, true);
  const Var parts[] = {fwd, bwd};
  return nn::concat_cols(parts);
}

Var ConversionModel::condition_memory(nn::Graph& g, Var encoded, Var prosody) {
  if (prosody.rows() != 1 || prosody.cols() != hyper_.prosody.embedding_dim)
    throw ShapeError("prosody embedding must be 1 x " + std::to_string(hyper_.prosody.embedding_dim));
  const Var parts[] = {encoded, nn::repeat_rows(prosody, encoded.rows())};
  return memory_proj_(g, params_, nn::concat_cols(parts));
}

Var ConversionModel::prosody_embedding(nn::Graph& g, Var mel) { return prosody_.encode(g, params_, mel); }

Var ConversionModel::attention_keys(nn::Graph& g, Var memory) { return attention_.keys(g, params_, memory); }

nn::AttentionLayer::Step ConversionModel::attention_step(nn::Graph& g, Var query, Var memory, Var keys) {
  return attention_.step(g, params_, query, memory, keys);
}

DecodeOutput ConversionModel::decode_mel(nn::Graph& g, Var memory, const Matrix* teacher, int max_steps) {
  const auto& h = hyper_;
  auto& ps = params_;
  if (memory.cols() != h.encoder_dim()) throw ShapeError("decoder memory width mismatch");
  if (teacher != nullptr && teacher->cols() != h.n_mels) throw ShapeError("teacher mel band count mismatch");
  const int steps = teacher != nullptr ? static_cast<int>(teacher->rows()) : max_steps;
  if (steps < 1) throw ParamError("decoder needs at least one step");

  const Var keys = attention_keys(g, memory);
  Var context = g.constant(Matrix::Zero(1, h.encoder_dim()));
  Var h_att = attention_rnn_.zero_state(g);
  const auto prenet = [&](Var prev) {
    const Var p = nn::dropout(dec_prenet1_(g, ps, prev), h.dropout);
    return nn::dropout(dec_prenet2_(g, ps, p), h.dropout);
  };
  const auto attend = [&](Var p) {
    const Var att_in[] = {p, context};
    h_att = attention_rnn_.step(g, ps, nn::concat_cols(att_in), h_att);
    const auto att = attention_step(g, h_att, memory, keys);
    context = att.context;
    return att.weights;
  };
  const auto project = [&](Var x, Var ctx, Var* mel, Var* stop) {
    const Var feat_parts[] = {x, ctx};
    const Var feat = nn::concat_cols(feat_parts);
    *mel = mel_out_(g, ps, feat);
    *stop = stop_out_(g, ps, feat);
  };

  DecodeOutput out;
  std::vector<RowVector> weights;
  if (teacher != nullptr) {
    // Every decoder input is known up front, so only the attention loop runs step by step.
    Matrix prev = Matrix::Zero(steps, h.n_mels);
    if (steps > 1) prev.bottomRows(steps - 1) = teacher->topRows(steps - 1);
    const Var pre = prenet(g.constant(std::move(prev)));
    std::vector<Var> h_atts, contexts;
    for (int t = 0; t < steps; ++t) {
      weights.emplace_back(attend(nn::slice_rows(pre, t, 1)).value().row(0));
      h_atts.push_back(h_att);
      contexts.push_back(context);
    }
    const Var ctx = nn::concat_rows(contexts);
    const Var dec_in_parts[] = {nn::concat_rows(h_atts), ctx};
    Var x = decoder_input_(g, ps, nn::concat_cols(dec_in_parts));
    for (const auto& rnn : decoder_rnns_) x = nn::add(x, rnn.run(g, ps, x));
    project(x, ctx, &out.mel, &out.stop_logits);
    for (Index t = 0; t < out.stop_logits.rows(); ++t) {
      const double z = out.stop_logits.value()(t, 0);
      out.stop_probs.push_back(1.0 / (1.0 + std::exp(-z)));
    }
  } else {
    std::vector<Var> h_dec;
    for (const auto& rnn : decoder_rnns_) h_dec.push_back(rnn.zero_state(g));
    std::vector<Var> mel_frames, stop_frames;
    Matrix prev_frame = Matrix::Zero(1, h.n_mels);
    for (int t = 0; t < steps; ++t) {
      weights.emplace_back(attend(prenet(g.constant(prev_frame))).value().row(0));
      const Var dec_in_parts[] = {h_att, context};
      Var x = decoder_input_(g, ps, nn::concat_cols(dec_in_parts));
      for (std::size_t l = 0; l < decoder_rnns_.size(); ++l) {
        h_dec[l] = decoder_rnns_[l].step(g, ps, x, h_dec[l]);
        x = nn::add(x, h_dec[l]);
      }
      Var mel_t, stop_t;
      project(x, context, &mel_t, &stop_t);
      mel_frames.push_back(mel_t);
      stop_frames.push_back(stop_t);
      const double prob = 1.0 / (1.0 + std::exp(-stop_t.value()(0, 0)));
      out.stop_probs.push_back(prob);
      prev_frame = mel_t.value();
      if (prob > 0.5) break;
      if (t + 1 == steps) out.truncated = true;
    }
    out.mel = nn::concat_rows(mel_frames);
    out.stop_logits = nn::concat_rows(stop_frames);
  }
  out.alignment.resize(static_cast<Index>(weights.size()), memory.rows());
  for (std::size_t t = 0; t < weights.size(); ++t) out.alignment.row(static_cast<Index>(t)) = weights[t];
  return out;
}

Var conversion_loss(nn::Graph& g, ConversionModel& model, const ConversionExample& ex, ConversionStepResult* stats) {
  if (ex.bn.num_frames() != ex.mel.num_frames())
    throw ParamError("example '" + ex.id + "': bottleneck and mel frame counts differ");
  const Var bn = g.constant(ex.bn.frames);
  const Var encoded = model.encode_content(g, bn);
  const Var prosody = ex.prosody ? g.constant(Matrix(*ex.prosody)) : model.prosody_embedding(g, g.constant(ex.mel.frames));
  const Var memory = model.condition_memory(g, encoded, prosody);
  const DecodeOutput dec = model.decode_mel(g, memory, &ex.mel.frames);

  Matrix stop_target = Matrix::Zero(ex.mel.num_frames(), 1);
  stop_target(stop_target.rows() - 1, 0) = 1.0;
  const Var l1 = nn::l1_loss(dec.mel, ex.mel.frames);
  const Var bce = nn::bce_with_logits(dec.stop_logits, stop_target);
  if (stats != nullptr) {
    stats->l1 = l1.value()(0, 0);
    stats->bce = bce.value()(0, 0);
    stats->loss = stats->l1 + stats->bce;
    stats->diagonality = alignment_diagonality(dec.alignment);
  }
  return nn::add(l1, bce);
}

ConversionTrainer::ConversionTrainer(ConversionModel& model, nn::AdamConfig adam, std::uint64_t seed)
    : model_(model), optimizer_(adam), seed_(seed) {}

namespace {

ConversionStepResult run_batch(nn::Graph& g, ConversionModel& model, std::span<const ConversionExample> batch,
                               Var* total) {
  if (batch.empty()) throw ParamError("empty training batch");
  ConversionStepResult acc;
  std::vector<Var> losses;
  for (const auto& ex : batch) {
    ConversionStepResult r;
    losses.push_back(conversion_loss(g, model, ex, &r));
    acc.l1 += r.l1;
    acc.bce += r.bce;
    acc.diagonality += r.diagonality;
  }
  const double n = static_cast<double>(batch.size());
  acc.l1 /= n;
  acc.bce /= n;
  acc.diagonality /= n;
  acc.loss = acc.l1 + acc.bce;
  Var sum = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) sum = nn::add(sum, losses[i]);
  *total = nn::affine(sum, 1.0 / n, 0.0);
  return acc;
}

}  // namespace

ConversionStepResult ConversionTrainer::train_step(std::span<const ConversionExample> batch) {
  nn::Graph g({.training = true, .dropout_seed = mix64(seed_ ^ static_cast<std::uint64_t>(optimizer_.steps()))});
  Var total;
  const ConversionStepResult result = run_batch(g, model_, batch, &total);
  if (!std::isfinite(result.loss)) throw DivergedError("conversion loss is not finite");
  model_.params().zero_grad();
  g.backward(total);
  optimizer_.step(model_.params());
  return result;
}

ConversionStepResult ConversionTrainer::evaluate(std::span<const ConversionExample> batch) {
  nn::Graph g;
  Var total;
  return run_batch(g, model_, batch, &total);
}

ConversionOutput convert(ConversionModel& model, const BottleneckFeatures& bn, const RowVector& prosody, int max_steps,
                         double max_decoder_ratio) {
  if (bn.num_frames() < 1) throw ParamError("cannot convert an empty feature sequence");
  if (max_steps <= 0)
    max_steps = std::max(1, static_cast<int>(std::ceil(max_decoder_ratio * static_cast<double>(bn.num_frames()))));
  nn::Graph g;
  const Var encoded = model.encode_content(g, g.constant(bn.frames));
  const Var memory = model.condition_memory(g, encoded, g.constant(Matrix(prosody)));
  const DecodeOutput dec = model.decode_mel(g, memory, nullptr, max_steps);
  ConversionOutput out;
  out.mel.frames = dec.mel.value();
  out.mel.hop_ms = bn.hop_ms;
  out.alignment = dec.alignment;
  out.stop_probs = dec.stop_probs;
  out.truncated = dec.truncated;
  return out;
}

}  // namespace melvc
