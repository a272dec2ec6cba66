// SPDX-License-Identifier: Apache-2.0
#include "melvc/vocoder.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "melvc/errors.hpp"
#include "melvc/rng.hpp"

namespace melvc {

using nn::Activation;
using nn::Var;

namespace {

constexpr int kHop = 160;

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// One GRU update in place; gx already holds x Wx + bx.
void gru_update(RowVector& h, const RowVector& gx, const Matrix& wh, const RowVector& bh) {
  const Index hid = h.cols();
  const RowVector gh = h * wh + bh;
  for (Index j = 0; j < hid; ++j) {
    const double z = sigmoid(gx(j) + gh(j));
    const double r = sigmoid(gx(hid + j) + gh(hid + j));
    const double n = std::tanh(gx(2 * hid + j) + r * gh(2 * hid + j));
    h(j) = (1.0 - z) * h(j) + z * n;
  }
}

LpcTrack track_for(const MelSpectrogram& mel, const MelLpcAnalyzer* a) {
  if (mel.num_frames() < 1) throw ParamError("mel spectrogram has no frames");
  const auto& analyzer = a != nullptr ? *a : default_lpc_analyzer();
  if (mel.n_mels() != analyzer.pseudo_inverse().cols())
    throw ShapeError("mel band count " + std::to_string(mel.n_mels()) + " does not match the filterbank");
  return analyzer.analyze(mel);
}

}  // namespace

VocoderHyper VocoderHyper::toy() {
  VocoderHyper h;
  h.cond_dim /= 4;
  h.embed_dim /= 4;
  h.gru_a /= 4;
  h.gru_b /= 4;
  return h;
}

VocoderModel::VocoderModel(const VocoderHyper& hyper, std::uint64_t seed) : hyper_(hyper) {
  Rng rng(seed);
  auto& ps = params_;
  const auto& h = hyper_;
  conv1_ = nn::Conv1dLayer::create(ps, "vocoder.frame.conv.0", 3, h.n_mels, h.cond_dim, rng);
  conv2_ = nn::Conv1dLayer::create(ps, "vocoder.frame.conv.1", 3, h.cond_dim, h.cond_dim, rng);
  fc1_ = nn::DenseLayer::create(ps, "vocoder.frame.fc.0", h.cond_dim, h.cond_dim, Activation::relu, rng);
  fc2_ = nn::DenseLayer::create(ps, "vocoder.frame.fc.1", h.cond_dim, h.cond_dim, Activation::tanh, rng);
  embedding_ = ps.add_uniform("vocoder.sample.embedding", kMulawLevels, h.embed_dim, 1, rng);
  gru_a_ = nn::GruLayer::create(ps, "vocoder.sample.gru_a", 3 * h.embed_dim + h.cond_dim, h.gru_a, rng);
  gru_b_ = nn::GruLayer::create(ps, "vocoder.sample.gru_b", h.gru_a + h.cond_dim, h.gru_b, rng);
  dual1_ = nn::DenseLayer::create(ps, "vocoder.sample.dual.0", h.gru_b, kMulawLevels, Activation::tanh, rng);
  dual2_ = nn::DenseLayer::create(ps, "vocoder.sample.dual.1", h.gru_b, kMulawLevels, Activation::tanh, rng);
  dual_scale1_ = ps.add_constant("vocoder.sample.dual.0.scale", 1, kMulawLevels, 0.5);
  dual_scale2_ = ps.add_constant("vocoder.sample.dual.1.scale", 1, kMulawLevels, 0.5);
}

Var VocoderModel::frame_condition(nn::Graph& g, Var mel) {
  if (mel.cols() != hyper_.n_mels)
    throw ShapeError("vocoder expects " + std::to_string(hyper_.n_mels) + " mel bands, got " +
                     std::to_string(mel.cols()));
  if (mel.rows() < 1) throw ShapeError("vocoder needs at least one frame");
  auto& ps = params_;
  const Var c1 = nn::relu(conv1_(g, ps, nn::pad_rows_replicate(mel, 1, 1), nn::Padding::valid));
  const Var c2 = nn::relu(conv2_(g, ps, nn::pad_rows_replicate(c1, 1, 1), nn::Padding::valid));
  return fc2_(g, ps, fc1_(g, ps, nn::add(c1, c2)));
}

Matrix VocoderModel::frame_condition(const MelSpectrogram& mel) {
  nn::Graph g;
  return frame_condition(g, g.constant(mel.frames)).value();
}

Var VocoderModel::sample_logits(nn::Graph& g, Var cond, std::span<const int> s_prev, std::span<const int> e_prev,
                                std::span<const int> p_code, std::span<const Index> frame_of) {
  const std::size_t len = frame_of.size();
  if (s_prev.size() != len || e_prev.size() != len || p_code.size() != len)
    throw ShapeError("sample_logits input spans differ in length");
  if (len == 0) throw ShapeError("sample_logits needs at least one sample");
  auto& ps = params_;
  const Var table = g.param(ps[embedding_]);

  std::vector<Var> rows;
  rows.reserve(len);
  Index run_begin = 0;
  // Expand cond per sample by slicing runs of equal frame index.
  for (std::size_t i = 1; i <= len; ++i) {
    if (i == len || frame_of[i] != frame_of[i - 1]) {
      const Index f = frame_of[i - 1];
      if (f < 0 || f >= cond.rows()) throw ShapeError("sample frame index out of range");
      rows.push_back(nn::repeat_rows(nn::slice_rows(cond, f, 1), static_cast<Index>(i) - run_begin));
      run_begin = static_cast<Index>(i);
    }
  }
  const Var cond_rep = nn::concat_rows(rows);
  const Var a_in[] = {nn::embedding(table, s_prev), nn::embedding(table, e_prev), nn::embedding(table, p_code),
                      cond_rep};
  const Var ha = gru_a_.run(g, ps, nn::concat_cols(a_in));
  const Var b_in[] = {ha, cond_rep};
  const Var hb = gru_b_.run(g, ps, nn::concat_cols(b_in));
  const Var d1 = nn::mul_row(dual1_(g, ps, hb), g.param(ps[dual_scale1_]));
  const Var d2 = nn::mul_row(dual2_(g, ps, hb), g.param(ps[dual_scale2_]));
  return nn::add(d1, d2);
}

SampleRunner::SampleRunner(const VocoderModel& model, const Matrix& cond) {
  const auto& ps = model.params_;
  const auto& h = model.hyper_;
  ha_ = h.gru_a;
  hb_ = h.gru_b;
  if (cond.cols() != h.cond_dim) throw ShapeError("conditioning width mismatch");
  const Matrix& table = ps[model.embedding_].value;
  const Matrix& wxa = ps[model.gru_a_.wx].value;
  const Index e = h.embed_dim;
  emb_s_ = table * wxa.middleRows(0, e);
  emb_e_ = table * wxa.middleRows(e, e);
  emb_p_ = table * wxa.middleRows(2 * e, e);
  cond_a_ = (cond * wxa.middleRows(3 * e, h.cond_dim)).rowwise() + RowVector(ps[model.gru_a_.bx].value.row(0));
  wh_a_ = ps[model.gru_a_.wh].value;
  bh_a_ = ps[model.gru_a_.bh].value.row(0);

  const Matrix& wxb = ps[model.gru_b_.wx].value;
  wxb_h_ = wxb.middleRows(0, ha_);
  cond_b_ = (cond * wxb.middleRows(ha_, h.cond_dim)).rowwise() + RowVector(ps[model.gru_b_.bx].value.row(0));
  wh_b_ = ps[model.gru_b_.wh].value;
  bh_b_ = ps[model.gru_b_.bh].value.row(0);

  w1_ = ps[model.dual1_.weight].value;
  b1_ = ps[model.dual1_.bias].value.row(0);
  w2_ = ps[model.dual2_.weight].value;
  b2_ = ps[model.dual2_.bias].value.row(0);
  s1_ = ps[model.dual_scale1_].value.row(0);
  s2_ = ps[model.dual_scale2_].value.row(0);
  reset();
}

void SampleRunner::reset() {
  h_a_ = RowVector::Zero(ha_);
  h_b_ = RowVector::Zero(hb_);
  probs_ = RowVector::Zero(kMulawLevels);
}

const RowVector& SampleRunner::step(int s_prev, int e_prev, int p_code, Index frame) {
  const RowVector gxa = emb_s_.row(s_prev) + emb_e_.row(e_prev) + emb_p_.row(p_code) + cond_a_.row(frame);
  gru_update(h_a_, gxa, wh_a_, bh_a_);
  const RowVector gxb = h_a_ * wxb_h_ + cond_b_.row(frame);
  gru_update(h_b_, gxb, wh_b_, bh_b_);
  const RowVector t1 = ((h_b_ * w1_ + b1_).array().tanh()).matrix();
  const RowVector t2 = ((h_b_ * w2_ + b2_).array().tanh()).matrix();
  const RowVector logits = s1_.cwiseProduct(t1) + s2_.cwiseProduct(t2);
  const double top = logits.maxCoeff();
  probs_ = (logits.array() - top).exp().matrix();
  probs_ /= probs_.sum();
  return probs_;
}

Waveform synthesize(const MelSpectrogram& mel, VocoderModel* model, const SynthesisOptions& options) {
  const LpcTrack track = track_for(mel, options.analyzer);
  check_stable(track);
  const std::size_t n = static_cast<std::size_t>(mel.num_frames()) * kHop;
  const int order = track.order();
  const bool copy = options.mode == SynthesisMode::copy;
  if (copy && options.excitation.size() < n)
    throw ParamError("copy synthesis needs " + std::to_string(n) + " excitation samples, got " +
                     std::to_string(options.excitation.size()));
  if (!copy && model == nullptr) throw ParamError("neural synthesis needs a vocoder model");

  std::optional<SampleRunner> runner;
  if (!copy) runner.emplace(*model, model->frame_condition(mel));
  Rng rng(options.seed);

  std::vector<double> s(n, 0.0);
  double e_prev = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Index f = track.frame_for_sample(t);
    double p = 0.0;
    for (int i = 1; i <= order && static_cast<std::size_t>(i) <= t; ++i) p += track.coeffs(f, i - 1) * s[t - i];
    double e;
    if (copy) {
      e = options.excitation[t];
    } else {
      const int s_code = mulaw_encode(t > 0 ? s[t - 1] : 0.0);
      const RowVector& probs = runner->step(s_code, mulaw_encode(e_prev), mulaw_encode(p), f);
      int code = 0;
      if (options.mode == SynthesisMode::neural_argmax) {
        probs.maxCoeff(&code);
      } else {
        const double u = rng.uniform();
        double acc = 0.0;
        code = kMulawLevels - 1;
        for (int k = 0; k < kMulawLevels; ++k) {
          acc += probs(k);
          if (u < acc) {
            code = k;
            break;
          }
        }
      }
      e = mulaw_decode(code);
    }
    s[t] = std::clamp(p + e, -1.0, 1.0);
    e_prev = e;
  }
  return Waveform(std::move(s), kWorkingRate);
}

std::vector<double> vocoder_residual(const MelSpectrogram& mel, const Waveform& w, const MelLpcAnalyzer* analyzer) {
  const LpcTrack track = track_for(mel, analyzer);
  const std::size_t n = static_cast<std::size_t>(mel.num_frames()) * kHop;
  if (w.size() < n) throw ShapeError("waveform shorter than the mel frames it should cover");
  return lpc_residual(std::span<const double>(w.samples.data(), n), track);
}

VocoderTargets vocoder_targets(const VocoderExample& ex, const MelLpcAnalyzer* analyzer) {
  const LpcTrack track = track_for(ex.mel, analyzer);
  const std::size_t n = static_cast<std::size_t>(ex.mel.num_frames()) * kHop;
  if (ex.audio.size() < n)
    throw ShapeError("audio has " + std::to_string(ex.audio.size()) + " samples, mel needs " + std::to_string(n));
  const auto& x = ex.audio.samples;
  const int order = track.order();
  VocoderTargets out;
  out.s_prev.resize(n);
  out.e_prev.resize(n);
  out.p_code.resize(n);
  out.target.resize(n);
  out.frame_of.resize(n);
  double e_prev = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const Index f = track.frame_for_sample(t);
    double p = 0.0;
    for (int i = 1; i <= order && static_cast<std::size_t>(i) <= t; ++i) p += track.coeffs(f, i - 1) * x[t - i];
    const double e = x[t] - p;
    out.s_prev[t] = mulaw_encode(t > 0 ? x[t - 1] : 0.0);
    out.e_prev[t] = mulaw_encode(e_prev);
    out.p_code[t] = mulaw_encode(p);
    out.target[t] = mulaw_encode(e);
    out.frame_of[t] = f;
    e_prev = e;
  }
  return out;
}

VocoderTrainer::VocoderTrainer(VocoderModel& model, nn::AdamConfig adam, std::uint64_t seed, std::size_t chunk,
                               const MelLpcAnalyzer* analyzer)
    : model_(model), optimizer_(adam), seed_(seed), chunk_(chunk), analyzer_(analyzer) {
  if (chunk_ == 0) throw ParamError("chunk length must be positive");
}

void VocoderTrainer::add_example(const VocoderExample& ex) {
  data_.push_back({ex.mel.frames, vocoder_targets(ex, analyzer_)});
}

double VocoderTrainer::chunk_loss(nn::Graph& g, Var* total, bool whole) {
  if (data_.empty()) throw ParamError("vocoder trainer has no examples");
  std::vector<Var> losses;
  double weight = 0.0;
  const auto step = static_cast<std::uint64_t>(optimizer_.steps());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const auto& d = data_[i];
    const std::size_t n = d.targets.size();
    std::size_t begin = 0, len = n;
    if (!whole && n > chunk_) {
      len = chunk_;
      begin = static_cast<std::size_t>(mix64(seed_ ^ mix64(step * 0x9E3779B97F4A7C15ULL + i)) % (n - chunk_ + 1));
    }
    const auto sub = [&](const auto& v) { return std::span(v).subspan(begin, len); };
    const Var cond = model_.frame_condition(g, g.constant(d.mel));
    const Var logits = model_.sample_logits(g, cond, sub(d.targets.s_prev), sub(d.targets.e_prev),
                                            sub(d.targets.p_code), sub(d.targets.frame_of));
    losses.push_back(nn::affine(nn::softmax_cross_entropy(logits, sub(d.targets.target)), static_cast<double>(len), 0));
    weight += static_cast<double>(len);
  }
  Var sum = losses[0];
  for (std::size_t i = 1; i < losses.size(); ++i) sum = nn::add(sum, losses[i]);
  *total = nn::affine(sum, 1.0 / weight, 0.0);
  return total->value()(0, 0);
}

double VocoderTrainer::train_step() {
  nn::Graph g({.training = true, .dropout_seed = 0});
  Var total;
  const double loss = chunk_loss(g, &total, false);
  if (!std::isfinite(loss)) throw DivergedError("vocoder loss is not finite");
  model_.params().zero_grad();
  g.backward(total);
  optimizer_.step(model_.params());
  return loss;
}

double VocoderTrainer::evaluate() {
  nn::Graph g;
  Var total;
  return chunk_loss(g, &total, false);
}

double VocoderTrainer::full_loss() {
  nn::Graph g;
  Var total;
  return chunk_loss(g, &total, true);
}

}  // namespace melvc
