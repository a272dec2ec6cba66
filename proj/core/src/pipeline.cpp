// SPDX-License-Identifier: Apache-2.0
#include "melvc/pipeline.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"
#include "melvc/errors.hpp"
#include "melvc/mcd.hpp"
#include "melvc/prosody.hpp"

namespace melvc {

using json = nlohmann::ordered_json;

Pipeline::Pipeline(PipelineConfig cfg)
    : cfg_((cfg.validate(), std::move(cfg))),
      front_end_(cfg_.spectral()),
      analyzer_(front_end_.filterbank(), cfg_.lpc()),
      bottleneck_(cfg_.n_mels, cfg_.bn_dim, cfg_.bn_seed) {}

Waveform Pipeline::load_audio(const std::filesystem::path& path) const {
  return resample(read_wav(path), cfg_.sample_rate);
}

MelSpectrogram Pipeline::mel(const Waveform& w) const { return front_end_.mel_spectrogram(w); }

BottleneckFeatures Pipeline::bottleneck(const MelSpectrogram& mel) const { return bottleneck_.extract(mel); }

ConversionExample Pipeline::conversion_example(const Waveform& w, std::string id) const {
  ConversionExample ex;
  ex.mel = mel(w);
  ex.bn = bottleneck(ex.mel);
  ex.id = std::move(id);
  return ex;
}

ConversionTrainReport train_conversion(ConversionModel& model, std::span<const ConversionExample> examples, int steps,
                                       const nn::AdamConfig& adam, std::uint64_t seed, const ProgressFn& progress,
                                       int progress_every) {
  ConversionTrainer trainer(model, adam, seed);
  ConversionTrainReport report;
  report.initial = trainer.evaluate(examples);
  for (int s = 0; s < steps; ++s) {
    const auto r = trainer.train_step(examples);
    if (progress && progress_every > 0 && (s + 1) % progress_every == 0) progress({trainer.steps(), r.loss});
  }
  report.final = trainer.evaluate(examples);
  report.steps = trainer.steps();
  return report;
}

VocoderTrainReport train_vocoder(VocoderModel& model, std::span<const VocoderExample> examples, int steps,
                                 const nn::AdamConfig& adam, std::uint64_t seed, std::size_t chunk,
                                 const MelLpcAnalyzer* analyzer, const ProgressFn& progress, int progress_every) {
  VocoderTrainer trainer(model, adam, seed, chunk, analyzer);
  for (const auto& ex : examples) trainer.add_example(ex);
  VocoderTrainReport report;
  report.initial = trainer.full_loss();
  for (int s = 0; s < steps; ++s) {
    const double loss = trainer.train_step();
    if (progress && progress_every > 0 && (s + 1) % progress_every == 0) progress({trainer.steps(), loss});
  }
  report.final = trainer.full_loss();
  report.steps = trainer.steps();
  return report;
}

ProsodySelection select_prosody(ConversionModel& model, std::span<const MelSpectrogram> mels,
                                std::span<const std::string> ids) {
  if (mels.size() != ids.size()) throw ParamError("one id per mel spectrogram is required");
  ProsodySelection out;
  for (const auto& mel : mels) {
    nn::Graph g;
    out.embeddings.push_back(model.prosody_embedding(g, g.constant(mel.frames)).value());
  }
  out.index = select_medoid(out.embeddings);
  out.medoid = {out.embeddings[out.index], ids[out.index]};
  return out;
}

namespace {

std::string metadata(const char* kind, const PipelineConfig& cfg, std::int64_t step,
                     const std::optional<ProsodyEmbedding>& medoid) {
  json j;
  j["kind"] = kind;
  j["config_hash"] = config_hash(cfg);
  j["profile"] = std::string(profile_name(cfg.profile));
  j["step"] = step;
  if (medoid) j["medoid_utterance"] = medoid->source_utterance;
  return j.dump();
}

json parse_metadata(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (ckpt.metadata.empty()) return json::object();
  try {
    return json::parse(ckpt.metadata);
  } catch (const json::parse_error&) {
    throw FormatError("checkpoint " + path.string() + " holds malformed metadata");
  }
}

LoadedCheckpoint open_checkpoint(const std::filesystem::path& path, const PipelineConfig& cfg, json* meta) {
  if (!std::filesystem::exists(path)) throw NotFoundError("checkpoint not found: " + path.string());
  LoadedCheckpoint loaded = load_checkpoint(path, config_hash(cfg));
  *meta = parse_metadata(loaded.checkpoint, path);
  if (meta->contains("profile") && (*meta)["profile"] != std::string(profile_name(cfg.profile)))
    throw FormatError("checkpoint " + path.string() + " was trained with profile " +
                      (*meta)["profile"].get<std::string>() + ", config asks for " +
                      std::string(profile_name(cfg.profile)));
  return loaded;
}

}  // namespace

void save_conversion(const std::filesystem::path& path, const ConversionModel& model, const PipelineConfig& cfg,
                     std::int64_t step, const std::optional<ProsodyEmbedding>& medoid) {
  Checkpoint ckpt;
  add_parameters(ckpt, model.params());
  if (medoid) ckpt.tensors.emplace_back(kMedoidTensor, from_matrix(Matrix(medoid->vector)));
  ckpt.metadata = metadata("conversion", cfg, step, medoid);
  save_checkpoint(path, ckpt);
}

ConversionBundle load_conversion(const std::filesystem::path& path, const PipelineConfig& cfg) {
  json meta;
  LoadedCheckpoint loaded = open_checkpoint(path, cfg, &meta);
  ConversionBundle bundle{ConversionModel(cfg.conversion_hyper(), cfg.seed), std::nullopt, 0,
                          std::move(loaded.warnings)};
  restore_parameters(bundle.model.params(), loaded.checkpoint);
  if (const TensorF32* t = loaded.checkpoint.find(kMedoidTensor)) {
    const Matrix m = to_matrix(*t);
    if (m.rows() != 1 || m.cols() != cfg.conversion_hyper().prosody.embedding_dim)
      throw FormatError("medoid embedding in " + path.string() + " has the wrong shape");
    bundle.medoid = ProsodyEmbedding{m, meta.value("medoid_utterance", std::string())};
  }
  bundle.step = meta.value("step", std::int64_t{0});
  return bundle;
}

void save_vocoder(const std::filesystem::path& path, const VocoderModel& model, const PipelineConfig& cfg,
                  std::int64_t step) {
  Checkpoint ckpt;
  add_parameters(ckpt, model.params());
  ckpt.metadata = metadata("vocoder", cfg, step, std::nullopt);
  save_checkpoint(path, ckpt);
}

VocoderBundle load_vocoder(const std::filesystem::path& path, const PipelineConfig& cfg) {
  json meta;
  LoadedCheckpoint loaded = open_checkpoint(path, cfg, &meta);
  VocoderBundle bundle{VocoderModel(cfg.vocoder_hyper(), cfg.seed), 0, std::move(loaded.warnings)};
  restore_parameters(bundle.model.params(), loaded.checkpoint);
  bundle.step = meta.value("step", std::int64_t{0});
  return bundle;
}

std::string ConvertReport::to_json() const {
  json j;
  j["source_seconds"] = source_seconds;
  j["output_seconds"] = output_seconds;
  j["source_frames"] = source_frames;
  j["output_frames"] = output_frames;
  j["truncated"] = truncated;
  j["mcd_vs_source_db"] = mcd_vs_source;
  j["vocoder_samples_per_second"] = samples_per_second;
  j["medoid_utterance"] = medoid_utterance;
  j["warnings"] = warnings;
  return j.dump(2) + "\n";
}

ConvertReport run_convert(const PipelineConfig& cfg, const std::filesystem::path& source_wav,
                          const std::filesystem::path& model_dir, const std::filesystem::path& output_wav) {
  const Pipeline pipe(cfg);
  ConversionBundle conv = load_conversion(model_dir / kConversionCheckpoint, cfg);
  VocoderBundle voc = load_vocoder(model_dir / kVocoderCheckpoint, cfg);
  if (!conv.medoid) throw NotFoundError("conversion checkpoint has no medoid prosody embedding");

  const Waveform source = pipe.load_audio(source_wav);
  const MelSpectrogram src_mel = pipe.mel(source);
  const BottleneckFeatures bn = pipe.bottleneck(src_mel);
  const ConversionOutput converted = convert(conv.model, bn, conv.medoid->vector, 0, cfg.max_decoder_ratio);

  SynthesisOptions opts;
  opts.mode = SynthesisMode::neural_sample;
  opts.seed = cfg.seed;
  opts.analyzer = &pipe.analyzer();
  const auto t0 = std::chrono::steady_clock::now();
  const Waveform out = synthesize(converted.mel, &voc.model, opts);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (output_wav.has_parent_path()) std::filesystem::create_directories(output_wav.parent_path());
  write_wav(output_wav, out);

  ConvertReport report;
  report.source_seconds = source.duration_seconds();
  report.output_seconds = out.duration_seconds();
  report.source_frames = src_mel.num_frames();
  report.output_frames = converted.mel.num_frames();
  report.truncated = converted.truncated;
  report.mcd_vs_source = mcd_truncated(src_mel, converted.mel);
  report.samples_per_second = elapsed > 0 ? static_cast<double>(out.size()) / elapsed : 0.0;
  report.medoid_utterance = conv.medoid->source_utterance;
  report.warnings = conv.warnings;
  report.warnings.insert(report.warnings.end(), voc.warnings.begin(), voc.warnings.end());

  std::filesystem::path sidecar = output_wav;
  sidecar += ".json";
  const std::string text = report.to_json();
  write_file_bytes(sidecar, std::as_bytes(std::span(text.data(), text.size())));
  return report;
}

}  // namespace melvc
