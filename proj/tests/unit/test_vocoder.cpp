#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "melvc/errors.hpp"
#include "melvc/synthetic.hpp"
#include "melvc/vocoder.hpp"
#include "oracles.hpp"

using namespace melvc;

namespace {

VocoderExample example(std::uint64_t seed, double seconds) {
  VocoderExample ex;
  ex.audio = synthetic_utterance(seed, seconds);
  ex.mel = mel_spectrogram(ex.audio);
  return ex;
}

}  // namespace

TEST_CASE("frame conditioning shapes") {
  VocoderModel model(VocoderHyper::full(), 1);
  const auto mel = mel_spectrogram(synthetic_utterance(1, 0.3));
  const Matrix cond = model.frame_condition(mel);
  CHECK(cond.rows() == mel.num_frames());
  CHECK(cond.cols() == 128);
  MelSpectrogram flat;
  flat.frames = Matrix::Constant(7, 80, -2.0);
  const Matrix c = model.frame_condition(flat);
  for (Index t = 1; t < 7; ++t) CHECK((c.row(t) - c.row(0)).cwiseAbs().maxCoeff() < 1e-12);
  MelSpectrogram wrong;
  wrong.frames = Matrix::Zero(5, 60);
  CHECK_THROWS_AS(model.frame_condition(wrong), ShapeError);
}

TEST_CASE("sample runner matches the training graph") {
  VocoderModel model(VocoderHyper::toy(), 2);
  const auto ex = example(2, 0.2);
  const auto targets = vocoder_targets(ex);
  const std::size_t len = 400;
  const Matrix cond = model.frame_condition(ex.mel);
  nn::Graph g;
  const auto logits = model.sample_logits(g, g.constant(cond), std::span(targets.s_prev).first(len),
                                          std::span(targets.e_prev).first(len), std::span(targets.p_code).first(len),
                                          std::span(targets.frame_of).first(len));
  const Matrix probs = nn::softmax_rows(logits).value();
  SampleRunner runner(model, cond);
  for (std::size_t i = 0; i < len; ++i) {
    const RowVector& p = runner.step(targets.s_prev[i], targets.e_prev[i], targets.p_code[i], targets.frame_of[i]);
    CHECK(std::abs(p.sum() - 1.0) < 1e-6);
    CHECK((p - probs.row(static_cast<Index>(i))).cwiseAbs().maxCoeff() < 1e-10);
  }
  runner.reset();
  const RowVector again = runner.step(targets.s_prev[0], targets.e_prev[0], targets.p_code[0], targets.frame_of[0]);
  CHECK((again - probs.row(0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("teacher-forcing targets") {
  const auto ex = example(3, 0.3);
  const auto t = vocoder_targets(ex);
  const std::size_t n = static_cast<std::size_t>(ex.mel.num_frames()) * 160;
  REQUIRE(t.size() == n);
  CHECK(t.s_prev[0] == 128);
  CHECK(t.e_prev[0] == 128);
  const auto residual = vocoder_residual(ex.mel, ex.audio);
  for (std::size_t i = 1; i < n; ++i) {
    CHECK(t.s_prev[i] == mulaw_encode(ex.audio.samples[i - 1]));
    CHECK(t.e_prev[i] == t.target[i - 1]);
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(t.target[i] == mulaw_encode(residual[i]));
  VocoderExample short_ex = ex;
  short_ex.audio.samples.resize(n - 1);
  CHECK_THROWS_AS(vocoder_targets(short_ex), ShapeError);
}

TEST_CASE("copy synthesis with the mel-derived residual") {
  const auto w = synthetic_utterance(4, 1.0);
  const auto mel = mel_spectrogram(w);
  const auto e = vocoder_residual(mel, w);
  SynthesisOptions opt;
  opt.mode = SynthesisMode::copy;
  opt.excitation = e;
  const auto out = synthesize(mel, nullptr, opt);
  REQUIRE(out.size() == static_cast<std::size_t>(mel.num_frames()) * 160);
  double worst = 0;
  for (std::size_t i = 0; i < out.size(); ++i) worst = std::max(worst, std::abs(out.samples[i] - w.samples[i]));
  CHECK(worst < 1e-9);
  CHECK(testing::snr_db(std::span(w.samples).first(out.size()), out.samples) >= 60.0);

  const std::vector<double> too_short(10, 0.0);
  opt.excitation = too_short;
  CHECK_THROWS_AS(synthesize(mel, nullptr, opt), ParamError);
  SynthesisOptions neural;
  CHECK_THROWS_AS(synthesize(mel, nullptr, neural), ParamError);
}

TEST_CASE("neural synthesis is seeded and bounded") {
  VocoderModel model(VocoderHyper::toy(), 5);
  const auto mel = mel_spectrogram(synthetic_utterance(5, 0.25));
  SynthesisOptions opt;
  opt.seed = 9;
  const auto a = synthesize(mel, &model, opt);
  const auto b = synthesize(mel, &model, opt);
  CHECK(a.samples == b.samples);
  CHECK(a.size() == static_cast<std::size_t>(mel.num_frames()) * 160);
  for (double v : a.samples) {
    CHECK(std::isfinite(v));
    CHECK(std::abs(v) <= 1.0);
  }
  opt.seed = 10;
  CHECK(synthesize(mel, &model, opt).samples != a.samples);
  opt.mode = SynthesisMode::neural_argmax;
  const auto c = synthesize(mel, &model, opt);
  opt.seed = 11;
  CHECK(synthesize(mel, &model, opt).samples == c.samples);
}

TEST_CASE("arbitrary mel input never leaves [-1, 1]") {
  VocoderModel model(VocoderHyper::toy(), 6);
  Rng rng(6);
  MelSpectrogram mel;
  mel.frames = testing::random_matrix(6, 80, rng, 8.0);
  SynthesisOptions opt;
  const auto out = synthesize(mel, &model, opt);
  for (double v : out.samples) CHECK((std::isfinite(v) && std::abs(v) <= 1.0));
}

TEST_CASE("initial cross-entropy is near uniform") {
  VocoderModel model(VocoderHyper::toy(), 7);
  VocoderTrainer trainer(model, {1e-3}, 1);
  trainer.add_example(example(7, 0.5));
  const double ce = trainer.full_loss();
  CHECK(std::abs(ce - std::log(256.0)) / std::log(256.0) < 0.05);
}

TEST_CASE("vocoder trainer determinism and updates") {
  VocoderModel model(VocoderHyper::toy(), 8);
  VocoderTrainer frozen(model, {0.0}, 2);
  frozen.add_example(example(8, 0.3));
  const double l0 = frozen.full_loss();
  frozen.train_step();
  frozen.train_step();
  CHECK(frozen.full_loss() == l0);

  VocoderModel m2(VocoderHyper::toy(), 8);
  VocoderTrainer a(m2, {1e-3}, 4), b(m2, {1e-3}, 4);
  a.add_example(example(8, 0.3));
  b.add_example(example(8, 0.3));
  CHECK(a.evaluate() == b.evaluate());

  VocoderModel m3(VocoderHyper::toy(), 8);
  VocoderTrainer t(m3, {3e-3}, 5);
  t.add_example(example(9, 0.3));
  const double before = t.full_loss();
  for (int i = 0; i < 40; ++i) t.train_step();
  CHECK(t.full_loss() < before);
  CHECK(t.steps() == 40);

  VocoderExample bad = example(9, 0.3);
  bad.audio.samples.resize(100);
  CHECK_THROWS_AS(t.add_example(bad), ShapeError);
}

TEST_CASE("vocoder gradients on the toy profile") {
  const auto cases = testing::composed_cases();
  const auto it = std::find_if(cases.begin(), cases.end(), [](const auto& c) { return c.name == "vocoder"; });
  REQUIRE(it != cases.end());
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = it->run(seed);
    INFO(r.worst);
    CHECK(r.max_rel < 1e-4);
  }
}
