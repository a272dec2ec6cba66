#include <benchmark/benchmark.h>

#include <vector>

#include "melvc/augment.hpp"
#include "melvc/dsp.hpp"
#include "melvc/fft.hpp"
#include "melvc/mel_lpc.hpp"
#include "melvc/synthetic.hpp"

using namespace melvc;

namespace {

void BM_MelSpectrogram(benchmark::State& state) {
  const auto w = synthetic_utterance(1, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(mel_spectrogram(w));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}
BENCHMARK(BM_MelSpectrogram)->Unit(benchmark::kMillisecond);

void BM_Levinson(benchmark::State& state) {
  const int order = static_cast<int>(state.range(0));
  std::vector<double> r(static_cast<std::size_t>(order) + 1);
  for (int k = 0; k <= order; ++k) r[k] = std::pow(0.9, k);
  for (auto _ : state) benchmark::DoNotOptimize(levinson_durbin(r, order));
}
BENCHMARK(BM_Levinson)->Arg(16)->Arg(32);

void BM_MelToLpc(benchmark::State& state) {
  const auto mel = mel_spectrogram(synthetic_utterance(2, 1.0));
  const auto& an = default_lpc_analyzer();
  for (auto _ : state) benchmark::DoNotOptimize(an.analyze(mel));
  state.SetItemsProcessed(state.iterations() * mel.num_frames());
}
BENCHMARK(BM_MelToLpc)->Unit(benchmark::kMillisecond);

void BM_LpcResidualSynthesis(benchmark::State& state) {
  const auto w = synthetic_utterance(3, 1.0);
  const auto track = default_lpc_analyzer().analyze(mel_spectrogram(w));
  for (auto _ : state) benchmark::DoNotOptimize(lpc_synthesize(lpc_residual(w.samples, track), track));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.size()));
}
BENCHMARK(BM_LpcResidualSynthesis)->Unit(benchmark::kMillisecond);

void BM_TimeStretch(benchmark::State& state) {
  const auto w = synthetic_utterance(4, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(time_stretch(w, 0.8));
}
BENCHMARK(BM_TimeStretch)->Unit(benchmark::kMillisecond);

}  // namespace
