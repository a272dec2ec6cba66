// SPDX-License-Identifier: Apache-2.0
// melvc: feature extraction, training, conversion and evaluation driver.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "melvc/augment.hpp"
#include "melvc/errors.hpp"
#include "melvc/mcd.hpp"
#include "melvc/pipeline.hpp"
#include "melvc/synthetic.hpp"
#include "melvc/tensor_file.hpp"

namespace fs = std::filesystem;
using namespace melvc;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
};

PipelineConfig resolve(const Globals& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
  if (g.seed) cfg.seed = *g.seed;
  if (g.profile) cfg.profile = parse_profile(*g.profile);
  cfg.validate();
  return cfg;
}

std::string stem_of(const fs::path& p) {
  std::string s = p.stem().string();
  for (const char* suffix : {".mel", ".bn"})
    if (s.size() > std::char_traits<char>::length(suffix) && s.ends_with(suffix))
      s.resize(s.size() - std::char_traits<char>::length(suffix));
  return s;
}

bool is_original(const fs::path& p) { return p.stem().string().find("_sp") == std::string::npos; }

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ProgressFn progress_printer() {
  const auto t0 = std::chrono::steady_clock::now();
  return [t0](const TrainProgress& p) {
    std::printf("step %lld loss %.6f elapsed %.1fs\n", static_cast<long long>(p.step), p.loss, elapsed_since(t0));
    std::fflush(stdout);
  };
}

double snr_db(std::span<const double> ref, std::span<const double> test) {
  double sig = 0.0, err = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sig += ref[i] * ref[i];
    err += (ref[i] - test[i]) * (ref[i] - test[i]);
  }
  return err == 0.0 ? INFINITY : 10.0 * std::log10(sig / err);
}

void cmd_features(const PipelineConfig& cfg, const std::vector<std::string>& inputs, const fs::path& out) {
  const Pipeline pipe(cfg);
  fs::create_directories(out);
  for (const auto& in : inputs) {
    const MelSpectrogram mel = pipe.mel(pipe.load_audio(in));
    const fs::path dst = out / (stem_of(in) + ".mel.mvf");
    save_tensor(dst, from_matrix(mel.frames));
    std::printf("%s frames=%lld\n", dst.string().c_str(), static_cast<long long>(mel.num_frames()));
  }
}

void cmd_augment(const PipelineConfig& cfg, const std::vector<std::string>& inputs, const fs::path& out) {
  const Pipeline pipe(cfg);
  fs::create_directories(out);
  const auto speeds = cfg.effective_speeds();
  std::size_t written = 0;
  for (const auto& in : inputs) {
    const Waveform w = pipe.load_audio(in);
    for (double s : speeds) {
      const fs::path dst = out / (stem_of(in) + speed_suffix(s) + ".wav");
      write_wav(dst, time_stretch(w, s));
      ++written;
    }
  }
  std::printf("wrote %zu files (%zu inputs x %zu speeds)\n", written, inputs.size(), speeds.size());
}

MelSpectrogram load_or_compute_mel(const Pipeline& pipe, const std::string& in) {
  if (fs::path(in).extension() == ".wav") return pipe.mel(pipe.load_audio(in));
  MelSpectrogram mel;
  mel.frames = to_matrix(load_tensor(in));
  return mel;
}

void cmd_bn(const PipelineConfig& cfg, const std::vector<std::string>& inputs, const fs::path& out) {
  const Pipeline pipe(cfg);
  fs::create_directories(out);
  for (const auto& in : inputs) {
    const MelSpectrogram mel = load_or_compute_mel(pipe, in);
    const BottleneckFeatures bn = pipe.bottleneck(mel);
    const fs::path dst = out / (stem_of(in) + ".bn.mvf");
    save_bottleneck(dst, bn);
    std::printf("%s frames=%lld dim=%lld\n", dst.string().c_str(), static_cast<long long>(bn.num_frames()),
                static_cast<long long>(bn.dim()));
  }
}

ProsodySelection pick_medoid(const PipelineConfig& cfg, const Pipeline& pipe, ConversionModel& model,
                             const std::vector<std::string>& inputs) {
  std::vector<MelSpectrogram> mels;
  std::vector<std::string> ids;
  for (const auto& in : inputs) {
    if (cfg.medoid_originals_only && !is_original(in)) continue;
    mels.push_back(pipe.mel(pipe.load_audio(in)));
    ids.push_back(stem_of(in));
  }
  if (mels.empty()) throw ParamError("no original (non speed-perturbed) utterances to select a prosody medoid from");
  return select_prosody(model, mels, ids);
}

void cmd_train_conv(const PipelineConfig& cfg, const std::vector<std::string>& inputs, const fs::path& model_dir,
                    const std::string& init_from) {
  const Pipeline pipe(cfg);
  std::vector<ConversionExample> examples;
  for (const auto& in : inputs) examples.push_back(pipe.conversion_example(pipe.load_audio(in), stem_of(in)));
  ConversionModel model(cfg.conversion_hyper(), cfg.seed);
  if (!init_from.empty()) {
    model = load_conversion(init_from, cfg).model;
    std::printf("warm start from %s\n", init_from.c_str());
  }
  const nn::AdamConfig adam{.learning_rate = cfg.conversion_lr, .clip_norm = cfg.clip_norm};
  const auto report = train_conversion(model, examples, cfg.conversion_steps, adam, cfg.seed, progress_printer());
  std::printf("l1 %.6f -> %.6f, diagonality %.6f -> %.6f\n", report.initial.l1, report.final.l1,
              report.initial.diagonality, report.final.diagonality);
  const ProsodySelection sel = pick_medoid(cfg, pipe, model, inputs);
  fs::create_directories(model_dir);
  save_conversion(model_dir / kConversionCheckpoint, model, cfg, report.steps, sel.medoid);
  std::printf("medoid %s; saved %s\n", sel.medoid.source_utterance.c_str(),
              (model_dir / kConversionCheckpoint).string().c_str());
}

void cmd_prosody_select(const PipelineConfig& cfg, const std::vector<std::string>& inputs, const fs::path& model_dir) {
  const Pipeline pipe(cfg);
  const fs::path path = model_dir / kConversionCheckpoint;
  ConversionBundle bundle = load_conversion(path, cfg);
  for (const auto& w : bundle.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const ProsodySelection sel = pick_medoid(cfg, pipe, bundle.model, inputs);
  save_conversion(path, bundle.model, cfg, bundle.step, sel.medoid);
  std::printf("medoid %s (index %zu of %zu)\n", sel.medoid.source_utterance.c_str(), sel.index,
              sel.embeddings.size());
}

void cmd_train_voc(const PipelineConfig& cfg, const std::vector<std::string>& inputs, const fs::path& model_dir,
                   const std::string& init_from) {
  const Pipeline pipe(cfg);
  std::vector<VocoderExample> examples;
  for (const auto& in : inputs) {
    Waveform w = pipe.load_audio(in);
    examples.push_back({pipe.mel(w), std::move(w)});
  }
  VocoderModel model(cfg.vocoder_hyper(), cfg.seed);
  if (!init_from.empty()) model = load_vocoder(init_from, cfg).model;
  const nn::AdamConfig adam{.learning_rate = cfg.vocoder_lr, .clip_norm = cfg.clip_norm};
  const auto report = train_vocoder(model, examples, cfg.vocoder_steps, adam, cfg.seed,
                                    static_cast<std::size_t>(cfg.vocoder_chunk), &pipe.analyzer(), progress_printer());
  std::printf("nll %.6f -> %.6f nats/sample\n", report.initial, report.final);
  fs::create_directories(model_dir);
  save_vocoder(model_dir / kVocoderCheckpoint, model, cfg, report.steps);
  std::printf("saved %s\n", (model_dir / kVocoderCheckpoint).string().c_str());
}

void cmd_convert(const PipelineConfig& cfg, const std::string& input, const fs::path& model_dir,
                 const fs::path& output) {
  const ConvertReport r = run_convert(cfg, input, model_dir, output);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%s: %.3fs -> %.3fs, frames %lld -> %lld%s, mcd %.2f dB, vocoder %.0f samples/s\n",
              output.string().c_str(), r.source_seconds, r.output_seconds, static_cast<long long>(r.source_frames),
              static_cast<long long>(r.output_frames), r.truncated ? " (truncated)" : "", r.mcd_vs_source,
              r.samples_per_second);
}

void cmd_copysynth(const PipelineConfig& cfg, const std::string& input, const fs::path& output) {
  const Pipeline pipe(cfg);
  const Waveform w = pipe.load_audio(input);
  const MelSpectrogram mel = pipe.mel(w);
  const auto excitation = vocoder_residual(mel, w, &pipe.analyzer());
  SynthesisOptions opts;
  opts.mode = SynthesisMode::copy;
  opts.excitation = excitation;
  opts.analyzer = &pipe.analyzer();
  const auto t0 = std::chrono::steady_clock::now();
  const Waveform out = synthesize(mel, nullptr, opts);
  const double secs = elapsed_since(t0);
  write_wav(output, out);
  std::printf("%s: %zu samples, snr %.1f dB, %.0f samples/s\n", output.string().c_str(), out.size(),
              snr_db(std::span(w.samples).first(out.size()), out.samples), secs > 0 ? out.size() / secs : 0.0);
}

void cmd_analyze(const PipelineConfig& cfg, const std::string& input, const fs::path& output) {
  const Pipeline pipe(cfg);
  const MelSpectrogram mel = load_or_compute_mel(pipe, input);
  const LpcTrack track = pipe.analyzer().analyze(mel);
  double max_k = 0.0;
  for (Index i = 0; i < track.reflection.size(); ++i) max_k = std::max(max_k, std::abs(track.reflection.data()[i]));
  const auto [lo, hi] = std::minmax_element(track.gain.begin(), track.gain.end());
  std::printf("%lld frames, order %d, max |k| %.6f, gain [%.3e, %.3e]\n", static_cast<long long>(track.num_frames()),
              track.order(), max_k, *lo, *hi);
  if (!output.empty()) save_tensor(output, from_matrix(track.coeffs));
}

void cmd_eval_mcd(const PipelineConfig& cfg, const std::string& ref, const std::string& test) {
  const Pipeline pipe(cfg);
  const MelSpectrogram a = pipe.mel(pipe.load_audio(ref));
  const MelSpectrogram b = pipe.mel(pipe.load_audio(test));
  std::printf("mcd %.4f dB over %lld frames\n", mcd_truncated(a, b),
              static_cast<long long>(std::min(a.num_frames(), b.num_frames())));
}

void cmd_demo_corpus(const PipelineConfig& cfg, int count, double seconds, const fs::path& out) {
  fs::create_directories(out);
  for (int i = 0; i < count; ++i) {
    const fs::path dst = out / ("utt" + std::to_string(i) + ".wav");
    write_wav(dst, synthetic_utterance(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(i), seconds));
  }
  std::printf("wrote %d synthetic utterances to %s\n", count, out.string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"melvc: mel-domain voice conversion with an LPC-based neural vocoder"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON pipeline config")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for every random choice");
  app.add_option("--profile", g.profile, "Model size: full or toy")->check(CLI::IsMember({"full", "toy"}));
  app.fallthrough();

  std::vector<std::string> inputs;
  std::string output, model_dir, init_from, ref, test;
  std::optional<int> steps;
  int count = 2;
  double seconds = 1.0;

  auto* features = app.add_subcommand("features", "Log-mel features (MVF1) for each WAV");
  features->add_option("inputs", inputs, "WAV files")->required()->check(CLI::ExistingFile);
  features->add_option("-o,--output", output, "Output directory")->required();

  auto* augment = app.add_subcommand("augment", "Speed-perturbed copies of each WAV at every configured speed");
  augment->add_option("inputs", inputs, "WAV files")->required()->check(CLI::ExistingFile);
  augment->add_option("-o,--output", output, "Output directory")->required();

  auto* bn = app.add_subcommand("bn", "Bottleneck features from WAVs or mel tensors");
  bn->add_option("inputs", inputs, "WAV or .mel.mvf files")->required()->check(CLI::ExistingFile);
  bn->add_option("-o,--output", output, "Output directory")->required();

  auto* train_conv = app.add_subcommand("train-conv", "Train the conversion model and store the prosody medoid");
  train_conv->add_option("inputs", inputs, "Target-speaker WAV files")->required()->check(CLI::ExistingFile);
  train_conv->add_option("-m,--model-dir", model_dir, "Model directory")->required();
  train_conv->add_option("--steps", steps, "Override conversion_steps");
  train_conv->add_option("--init-from", init_from, "Warm start from a conversion checkpoint")
      ->check(CLI::ExistingFile);

  auto* select = app.add_subcommand("prosody-select", "Re-select the medoid prosody embedding");
  select->add_option("inputs", inputs, "Target-speaker WAV files")->required()->check(CLI::ExistingFile);
  select->add_option("-m,--model-dir", model_dir, "Model directory")->required();

  auto* train_voc = app.add_subcommand("train-voc", "Train the vocoder");
  train_voc->add_option("inputs", inputs, "WAV files")->required()->check(CLI::ExistingFile);
  train_voc->add_option("-m,--model-dir", model_dir, "Model directory")->required();
  train_voc->add_option("--steps", steps, "Override vocoder_steps");
  train_voc->add_option("--init-from", init_from, "Warm start from a vocoder checkpoint")->check(CLI::ExistingFile);

  auto* convert_cmd = app.add_subcommand("convert", "Convert a source WAV to the target voice");
  convert_cmd->add_option("input", ref, "Source WAV")->required()->check(CLI::ExistingFile);
  convert_cmd->add_option("-m,--model-dir", model_dir, "Model directory")->required();
  convert_cmd->add_option("-o,--output", output, "Output WAV")->required();

  auto* copysynth = app.add_subcommand("copysynth", "Analysis/synthesis through the LPC path with the true excitation");
  copysynth->add_option("input", ref, "WAV file")->required()->check(CLI::ExistingFile);
  copysynth->add_option("-o,--output", output, "Output WAV")->required();

  auto* analyze = app.add_subcommand("analyze", "Mel-derived LPC track of a WAV or mel tensor");
  analyze->add_option("input", ref, "WAV or .mel.mvf file")->required()->check(CLI::ExistingFile);
  analyze->add_option("-o,--output", output, "Optional MVF1 file for the T x order predictor");

  auto* eval = app.add_subcommand("eval-mcd", "Mel-cepstral distortion between two WAVs");
  eval->add_option("reference", ref, "Reference WAV")->required()->check(CLI::ExistingFile);
  eval->add_option("test", test, "Test WAV")->required()->check(CLI::ExistingFile);

  auto* demo = app.add_subcommand("demo-corpus", "Write synthetic speech-like utterances");
  demo->add_option("-n,--count", count, "Number of utterances")->check(CLI::PositiveNumber);
  demo->add_option("--seconds", seconds, "Duration of each utterance")->check(CLI::PositiveNumber);
  demo->add_option("-o,--output", output, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    PipelineConfig cfg = resolve(g);
    if (steps && *train_conv) cfg.conversion_steps = *steps;
    if (steps && *train_voc) cfg.vocoder_steps = *steps;

    if (*features) cmd_features(cfg, inputs, output);
    else if (*augment) cmd_augment(cfg, inputs, output);
    else if (*bn) cmd_bn(cfg, inputs, output);
    else if (*train_conv) cmd_train_conv(cfg, inputs, model_dir, init_from);
    else if (*select) cmd_prosody_select(cfg, inputs, model_dir);
    else if (*train_voc) cmd_train_voc(cfg, inputs, model_dir, init_from);
    else if (*convert_cmd) cmd_convert(cfg, ref, model_dir, output);
    else if (*copysynth) cmd_copysynth(cfg, ref, output);
    else if (*analyze) cmd_analyze(cfg, ref, output);
    else if (*eval) cmd_eval_mcd(cfg, ref, test);
    else if (*demo) cmd_demo_corpus(cfg, count, seconds, output);
  } catch (const TooShortError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParamError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
