#include <benchmark/benchmark.h>

#include "melvc/content.hpp"
#include "melvc/conversion.hpp"
#include "melvc/synthetic.hpp"
#include "melvc/vocoder.hpp"

using namespace melvc;

namespace {

VocoderHyper hyper(std::int64_t full) { return full != 0 ? VocoderHyper::full() : VocoderHyper::toy(); }

// Arg 0 = toy profile, 1 = full profile.
void BM_VocoderSampleStep(benchmark::State& state) {
  VocoderModel model(hyper(state.range(0)), 1);
  const auto mel = mel_spectrogram(synthetic_utterance(1, 0.1));
  SampleRunner runner(model, model.frame_condition(mel));
  int s = 128;
  for (auto _ : state) {
    const RowVector& p = runner.step(s, 128, 128, 0);
    Index best = 0;
    p.maxCoeff(&best);
    s = static_cast<int>(best);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_VocoderSampleStep)->Arg(0)->Arg(1);

void BM_NeuralSynthesis(benchmark::State& state) {
  VocoderModel model(hyper(state.range(0)), 2);
  const auto mel = mel_spectrogram(synthetic_utterance(2, 0.25));
  SynthesisOptions opt;
  for (auto _ : state) benchmark::DoNotOptimize(synthesize(mel, &model, opt));
  state.SetItemsProcessed(state.iterations() * mel.num_frames() * 160);
}
BENCHMARK(BM_NeuralSynthesis)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ConversionTrainStep(benchmark::State& state) {
  ConversionModel model(ConversionHyper::toy(), 3);
  ConversionExample ex;
  ex.mel = mel_spectrogram(synthetic_utterance(3, 1.0));
  ex.bn = surrogate_bottleneck(ex.mel, 1234);
  const std::vector<ConversionExample> batch{ex};
  ConversionTrainer trainer(model, {1e-4}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step(batch));
}
BENCHMARK(BM_ConversionTrainStep)->Unit(benchmark::kMillisecond);

void BM_VocoderTrainStep(benchmark::State& state) {
  VocoderModel model(VocoderHyper::toy(), 4);
  VocoderExample ex;
  ex.audio = synthetic_utterance(4, 1.0);
  ex.mel = mel_spectrogram(ex.audio);
  VocoderTrainer trainer(model, {1e-4}, 1);
  trainer.add_example(ex);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}
BENCHMARK(BM_VocoderTrainStep)->Unit(benchmark::kMillisecond);

}  // namespace
