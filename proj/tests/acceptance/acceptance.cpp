// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.
// Usage: melvc_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "format_fuzz.hpp"
#include "gradient_suite.hpp"
#include "melvc/augment.hpp"
#include "melvc/errors.hpp"
#include "melvc/pipeline.hpp"
#include "melvc/prosody.hpp"
#include "melvc/synthetic.hpp"
#include "oracles.hpp"

using namespace melvc;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::vector<double> row_of(const Matrix& m, Index t) { return {m.row(t).data(), m.row(t).data() + m.cols()}; }

// 1 ---------------------------------------------------------------------------

Outcome lpc_round_trip() {
  const auto t0 = Clock::now();
  const auto& fe = default_front_end();
  const auto& an = default_lpc_analyzer();
  Rng rng(1);
  double worst_snr = std::numeric_limits<double>::infinity();
  auto check = [&](const std::vector<double>& x) {
    const auto track = an.analyze(fe.mel_spectrogram(Waveform(x, kWorkingRate)));
    const auto y = lpc_synthesize(lpc_residual(x, track), track);
    worst_snr = std::min(worst_snr, testing::snr_db(x, y));
  };
  for (int i = 0; i < 100; ++i) {
    const auto n = static_cast<std::size_t>(1600 + rng.below(30000));
    std::vector<double> x(n);
    switch (i % 3) {
      case 0:
        for (auto& v : x) v = rng.uniform(-0.9, 0.9);
        break;
      case 1: x = testing::ar_signal(testing::formant_ar16(rng), n, rng, 0.02, 0.8); break;
      default: x = synthetic_utterance(rng.next_u64(), static_cast<double>(n) / kWorkingRate).samples;
    }
    check(x);
  }
  // 5 s of speech-shaped noise: white noise through a formant all-pole filter
  check(testing::ar_signal(testing::formant_ar16(rng), 5 * kWorkingRate, rng, 0.02, 0.8));
  const double secs = seconds_since(t0);
  return {worst_snr >= 60.0 && secs < 10.0, fmt("worst SNR %.1f dB over 101 signals (>= 60), %.1f s (< 10)", worst_snr, secs)};
}

// 2 ---------------------------------------------------------------------------

Outcome mel_lpc_fidelity() {
  Rng rng(2024);
  const auto& fe = default_front_end();
  const auto& an = default_lpc_analyzer();
  const int signals = 20;
  double total = 0, worst = 0;
  for (int s = 0; s < signals; ++s) {
    const Waveform w(testing::ar_signal(testing::formant_ar16(rng), kWorkingRate, rng, 0.02, 0.5), kWorkingRate);
    const auto mel = fe.mel_spectrogram(w);
    const auto track = an.analyze(mel);
    const auto pw = fe.power_spectrogram(preemphasize(w, fe.config().preemphasis));
    double lsd = 0;
    for (Index t = 0; t < mel.num_frames(); ++t) {
      const auto [ad, ed] = testing::levinson_oracle(testing::autocorr_oracle(row_of(pw, t), 16), 16);
      lsd += testing::log_spectral_distance_db(testing::lpc_envelope_db(row_of(track.coeffs, t), track.gain[t], 257),
                                               testing::lpc_envelope_db(ad, ed, 257));
    }
    lsd /= static_cast<double>(mel.num_frames());
    total += lsd;
    worst = std::max(worst, lsd);
  }
  const double mean = total / signals;
  return {mean <= 3.0, fmt("mean LSD %.2f dB over %d AR(16) signals (<= 3), worst signal %.2f dB", mean, signals, worst)};
}

// 3 and 7 share the augmented corpus ---------------------------------------------

const std::vector<Waveform>& test_corpus() {
  static const std::vector<Waveform> corpus = [] {
    std::vector<Waveform> c;
    Rng rng(7);
    for (int i = 0; i < 70; ++i) c.push_back(synthetic_utterance(1000 + i, rng.uniform(0.5, 1.5)));
    return c;
  }();
  return corpus;
}

const std::vector<AugmentedUtterance>& augmented_corpus() {
  static const auto all = augment_corpus(test_corpus(), kDefaultSpeeds);
  return all;
}

Outcome minimum_phase() {
  const auto& an = default_lpc_analyzer();
  std::size_t frames = 0, violations = 0, failures = 0;
  double max_k = 0;
  auto scan = [&](const MelSpectrogram& mel) {
    try {
      const auto track = an.analyze(mel);
      frames += static_cast<std::size_t>(track.num_frames());
      for (Index t = 0; t < track.num_frames(); ++t) {
        const double k = track.reflection.row(t).cwiseAbs().maxCoeff();
        max_k = std::max(max_k, k);
        if (!(k < 1.0)) ++violations;
      }
    } catch (const Error&) {
      ++failures;
    }
  };
  for (const auto& u : augmented_corpus()) scan(mel_spectrogram(u.audio));
  // mel frames far outside speech statistics
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    MelSpectrogram m;
    m.frames = testing::random_matrix(50, 80, rng, 12.0);
    scan(m);
  }
  MelSpectrogram silence;
  silence.frames = Matrix::Constant(20, 80, std::log(1e-10));
  scan(silence);
  return {violations == 0 && failures == 0,
          fmt("%zu frames, %zu with |k| >= 1, %zu analysis errors, max |k| %.4f", frames, violations, failures, max_k)};
}

Outcome augmentation_contract() {
  const auto& corpus = test_corpus();
  const auto& all = augmented_corpus();
  double worst_ratio = 0;
  for (const auto& u : all) {
    const double in = static_cast<double>(corpus[u.source_index].size());
    const double expected = in / u.speed;
    worst_ratio = std::max(worst_ratio, std::abs(static_cast<double>(u.audio.size()) - expected) / expected);
  }
  const auto tone = harmonic_tone(150, 1.0);
  double worst_pitch = 0;
  for (double speed : kDefaultSpeeds) {
    const auto out = time_stretch(tone, speed);
    const std::span<const double> mid(out.samples.data() + out.size() / 4, out.size() / 2);
    worst_pitch = std::max(worst_pitch, std::abs(testing::autocorr_pitch_hz(mid, kWorkingRate) - 150.0) / 150.0);
  }
  const bool pass = all.size() == 490 && worst_ratio <= 0.02 && worst_pitch <= 0.05;
  return {pass, fmt("%zu outputs (490), worst duration error %.3f%% (<= 2%%), worst 150 Hz pitch error %.2f%% (<= 5%%)",
                    all.size(), 100 * worst_ratio, 100 * worst_pitch)};
}

// 4 ---------------------------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_case;
  int runs = 0, bad = 0;
  std::size_t checked = 0, skipped = 0;
  auto run_all = [&](const std::vector<testing::GradCase>& cases) {
    for (const auto& c : cases)
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto r = c.run(seed);
        ++runs;
        checked += r.checked;
        skipped += r.skipped;
        if (!(r.max_rel < 1e-4) || r.checked == 0) ++bad;
        if (r.max_rel > worst) {
          worst = r.max_rel;
          worst_case = c.name + " seed " + std::to_string(seed);
        }
      }
  };
  run_all(testing::primitive_cases());
  run_all(testing::composed_cases());
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 120.0,
          fmt("%d case-seeds, %zu entries, %zu skipped, %d over 1e-4, max rel %.2e (%s), %.1f s (< 120)", runs, checked,
              skipped, bad, worst, worst_case.c_str(), secs)};
}

// 5, 6 and 10 share the toy models ------------------------------------------------

PipelineConfig toy_config() {
  PipelineConfig cfg;
  cfg.profile = Profile::toy;
  cfg.seed = 7;
  return cfg;
}

struct ToyState {
  std::vector<ConversionExample> conv_examples;
  std::vector<VocoderExample> voc_examples;
  std::optional<ConversionModel> conv;
  std::optional<VocoderModel> voc;
};

ToyState& toy() {
  static ToyState s = [] {
    ToyState st;
    const auto cfg = toy_config();
    const Pipeline pipe(cfg);
    for (int i = 0; i < 2; ++i) {
      const auto w = synthetic_utterance(10 + i, 1.0);
      st.conv_examples.push_back(pipe.conversion_example(w, "utt" + std::to_string(i)));
      st.voc_examples.push_back({st.conv_examples.back().mel, w});
    }
    st.conv.emplace(cfg.conversion_hyper(), cfg.seed);
    st.voc.emplace(cfg.vocoder_hyper(), cfg.seed);
    return st;
  }();
  return s;
}

bool conversion_trained = false, vocoder_trained = false;

Outcome conversion_overfit() {
  const auto t0 = Clock::now();
  auto& s = toy();
  ConversionTrainer trainer(*s.conv, {1e-3, 0.9, 0.999, 1e-8, 1.0}, 3);
  const auto initial = trainer.evaluate(s.conv_examples);
  int reached = -1;
  for (int step = 1; step <= 2000; ++step) {
    trainer.train_step(s.conv_examples);
    if (reached < 0 && step % 50 == 0 && trainer.evaluate(s.conv_examples).l1 < 0.1 * initial.l1) reached = step;
  }
  const auto final = trainer.evaluate(s.conv_examples);
  conversion_trained = true;
  const double secs = seconds_since(t0);

  // informational: free-running conversion against its own target
  const auto& ex = s.conv_examples[0];
  nn::Graph g;
  const RowVector prosody = s.conv->prosody_embedding(g, g.constant(ex.mel.frames)).value();
  const auto out = convert(*s.conv, ex.bn, prosody);
  const Index t = std::min(out.mel.num_frames(), ex.mel.num_frames());
  const double free_l1 =
      t > 0 ? (out.mel.frames.topRows(t) - ex.mel.frames.topRows(t)).cwiseAbs().mean() : std::nan("");

  const bool pass = reached > 0 && final.diagonality > initial.diagonality && secs < 300.0;
  return {pass, fmt("L1 %.4f -> %.4f after 2000 steps (%.1f%% of initial), below 10%% from step %d; diagonality "
                    "%.6f -> %.6f (must rise); %.0f s (< 300); free-run L1 %.3f over %ld/%ld frames (%s 2x final L1)",
                    initial.l1, final.l1, 100 * final.l1 / initial.l1, reached, initial.diagonality, final.diagonality,
                    secs, free_l1, static_cast<long>(out.mel.num_frames()), static_cast<long>(ex.mel.num_frames()),
                    free_l1 <= 2 * final.l1 ? "within" : "outside")};
}

Outcome vocoder_sanity() {
  const auto t0 = Clock::now();
  auto& s = toy();
  VocoderTrainer trainer(*s.voc, {1e-3, 0.9, 0.999, 1e-8, 1.0}, 3);
  for (const auto& ex : s.voc_examples) trainer.add_example(ex);
  const double initial = trainer.full_loss();
  const double ln256 = std::log(256.0);
  double final = initial;
  int steps = 0;
  while (steps < 5000) {
    trainer.train_step();
    ++steps;
    if (steps % 250 == 0) {
      final = trainer.full_loss();
      if (final < 0.8 * initial) break;
    }
  }
  vocoder_trained = true;
  const bool init_ok = std::abs(initial - ln256) / ln256 <= 0.05;
  return {init_ok && final < 0.8 * initial,
          fmt("initial CE %.4f nats (ln 256 = %.4f, off by %.2f%%, <= 5%%); %.4f after %d steps (%.1f%% of initial, < 80%%); "
              "%.0f s",
              initial, ln256, 100 * std::abs(initial - ln256) / ln256, final, steps, 100 * final / initial,
              seconds_since(t0))};
}

Outcome end_to_end() {
  if (!conversion_trained) (void)conversion_overfit();
  if (!vocoder_trained) (void)vocoder_sanity();
  auto& s = toy();
  const auto cfg = toy_config();
  const auto dir = fs::temp_directory_path() / "melvc_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::vector<MelSpectrogram> mels;
  std::vector<std::string> ids;
  for (const auto& ex : s.conv_examples) {
    mels.push_back(ex.mel);
    ids.push_back(ex.id);
  }
  const auto sel = select_prosody(*s.conv, mels, ids);
  save_conversion(dir / kConversionCheckpoint, *s.conv, cfg, 0, sel.medoid);
  save_vocoder(dir / kVocoderCheckpoint, *s.voc, cfg, 0);
  const auto source = dir / "source.wav";
  write_wav(source, synthetic_utterance(20, 1.0));

  const auto t0 = Clock::now();
  const auto report = run_convert(cfg, source, dir, dir / "a.wav");
  const double secs = seconds_since(t0);
  run_convert(cfg, source, dir, dir / "b.wav");
  const bool same = read_file_bytes(dir / "a.wav") == read_file_bytes(dir / "b.wav");

  const Waveform out = read_wav(dir / "a.wav");
  const Waveform in = read_wav(source);
  const double ratio = out.duration_seconds() / in.duration_seconds();
  const double level = testing::rms(out.samples);
  const bool pass = out.sample_rate == 16000 && std::abs(ratio - 1.0) <= 0.2 && level > 1e-4 && same && secs < 60.0;
  return {pass, fmt("%d Hz, duration ratio %.3f (within 0.8..1.2), RMS %.4g (> 1e-4), %s, %.1f s (< 60), truncated %s",
                    out.sample_rate, ratio, level, same ? "bitwise reproducible" : "NOT reproducible", secs,
                    report.truncated ? "yes" : "no")};
}

// 8 ---------------------------------------------------------------------------

Outcome medoid_oracle() {
  Rng rng(8);
  int mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<RowVector> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(testing::random_matrix(1, 128, rng));
    Matrix d = Matrix::Zero(static_cast<Index>(n), static_cast<Index>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d(static_cast<Index>(i), static_cast<Index>(j)) = (xs[i] - xs[j]).norm();
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (d.row(static_cast<Index>(i)).sum() < d.row(static_cast<Index>(best)).sum()) best = i;
    if (select_medoid(xs) != best) ++mismatches;
  }
  return {mismatches == 0, fmt("%d of 100 random sets (1..64 embeddings) disagree with exhaustive search", mismatches)};
}

// 9 ---------------------------------------------------------------------------

Outcome mulaw() {
  int bad_codes = 0;
  for (int c = 0; c < 256; ++c)
    if (mulaw_encode(mulaw_decode(c)) != c) ++bad_codes;
  std::vector<double> x(16000), y(16000);
  for (std::size_t n = 0; n < x.size(); ++n) {
    x[n] = std::sin(2 * std::numbers::pi * 200.0 * static_cast<double>(n) / 16000.0);
    y[n] = mulaw_decode(mulaw_encode(x[n]));
  }
  const double snr = testing::snr_db(x, y);
  return {bad_codes == 0 && snr >= 30.0,
          fmt("%d of 256 codes fail the round trip; full-scale sine SNR %.2f dB (>= 30)", bad_codes, snr)};
}

// 11 --------------------------------------------------------------------------

Outcome format_fuzz() {
  const auto r = testing::fuzz_formats(1000, 2024);
  return {r.unclean == 0 && r.accepted == 0 && r.mutations == 1000,
          fmt("%d mutations: %d FormatError, %d accepted, %d other exceptions%s%s", r.mutations, r.rejected, r.accepted,
              r.unclean, r.unclean ? ": " : "", r.first_unclean.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "lpc round trip", lpc_round_trip},
      {2, "mel to lpc fidelity", mel_lpc_fidelity},
      {3, "minimum phase", minimum_phase},
      {4, "gradient suite", gradient_suite},
      {5, "conversion overfit", conversion_overfit},
      {6, "vocoder sanity", vocoder_sanity},
      {7, "augmentation contract", augmentation_contract},
      {8, "medoid oracle", medoid_oracle},
      {9, "mu-law", mulaw},
      {10, "end-to-end smoke", end_to_end},
      {11, "format fuzz", format_fuzz},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.contains(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
