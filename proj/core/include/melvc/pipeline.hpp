// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "melvc/checkpoint.hpp"
#include "melvc/config.hpp"
#include "melvc/content.hpp"
#include "melvc/conversion.hpp"
#include "melvc/vocoder.hpp"

namespace melvc {

inline constexpr const char* kConversionCheckpoint = "conversion.mvc";
inline constexpr const char* kVocoderCheckpoint = "vocoder.mvc";
inline constexpr const char* kMedoidTensor = "prosody.medoid";

/// Front end, LPC analyzer, and content extractor configured from one PipelineConfig.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  const PipelineConfig& config() const { return cfg_; }
  const MelFrontEnd& front_end() const { return front_end_; }
  const MelLpcAnalyzer& analyzer() const { return analyzer_; }

  /// Reads a WAV and resamples it to the working rate.
  Waveform load_audio(const std::filesystem::path& path) const;
  MelSpectrogram mel(const Waveform& w) const;
  BottleneckFeatures bottleneck(const MelSpectrogram& mel) const;

  /// Mel and bottleneck features of `w`, paired for conversion training.
  ConversionExample conversion_example(const Waveform& w, std::string id) const;

 private:
  PipelineConfig cfg_;
  MelFrontEnd front_end_;
  MelLpcAnalyzer analyzer_;
  SurrogateBottleneck bottleneck_;
};

struct TrainProgress {
  std::int64_t step = 0;
  double loss = 0.0;
};
using ProgressFn = std::function<void(const TrainProgress&)>;

struct ConversionTrainReport {
  ConversionStepResult initial;
  ConversionStepResult final;
  std::int64_t steps = 0;
};

/// `steps` Adam updates on the whole example set, with evaluation before and after.
ConversionTrainReport train_conversion(ConversionModel& model, std::span<const ConversionExample> examples, int steps,
                                       const nn::AdamConfig& adam, std::uint64_t seed,
                                       const ProgressFn& progress = {}, int progress_every = 100);

struct VocoderTrainReport {
  double initial = 0.0;
  double final = 0.0;
  std::int64_t steps = 0;
};

VocoderTrainReport train_vocoder(VocoderModel& model, std::span<const VocoderExample> examples, int steps,
                                 const nn::AdamConfig& adam, std::uint64_t seed, std::size_t chunk,
                                 const MelLpcAnalyzer* analyzer = nullptr, const ProgressFn& progress = {},
                                 int progress_every = 500);

struct ProsodySelection {
  std::size_t index = 0;
  ProsodyEmbedding medoid;
  std::vector<RowVector> embeddings;
};

/// Embeds every mel with the model's reference encoder and picks the medoid.
ProsodySelection select_prosody(ConversionModel& model, std::span<const MelSpectrogram> mels,
                                std::span<const std::string> ids);

struct ConversionBundle {
  ConversionModel model;
  std::optional<ProsodyEmbedding> medoid;
  std::int64_t step = 0;
  std::vector<std::string> warnings;
};

struct VocoderBundle {
  VocoderModel model;
  std::int64_t step = 0;
  std::vector<std::string> warnings;
};

void save_conversion(const std::filesystem::path& path, const ConversionModel& model, const PipelineConfig& cfg,
                     std::int64_t step, const std::optional<ProsodyEmbedding>& medoid);
/// Throws NotFoundError when the file is missing and FormatError when it does not
/// match the configured model shape.
ConversionBundle load_conversion(const std::filesystem::path& path, const PipelineConfig& cfg);

void save_vocoder(const std::filesystem::path& path, const VocoderModel& model, const PipelineConfig& cfg,
                  std::int64_t step);
VocoderBundle load_vocoder(const std::filesystem::path& path, const PipelineConfig& cfg);

struct ConvertReport {
  double source_seconds = 0.0;
  double output_seconds = 0.0;
  Index source_frames = 0;
  Index output_frames = 0;
  bool truncated = false;
  double mcd_vs_source = 0.0;
  double samples_per_second = 0.0;
  std::string medoid_utterance;
  std::vector<std::string> warnings;

  std::string to_json() const;
};

/// source WAV -> 16 kHz -> mel -> bottleneck -> conversion with the stored medoid
/// prosody -> Mel-LPC vocoder -> output WAV, plus `<output>.json` with the report.
/// Throws NotFoundError when a checkpoint or the medoid embedding is missing.
ConvertReport run_convert(const PipelineConfig& cfg, const std::filesystem::path& source_wav,
                          const std::filesystem::path& model_dir, const std::filesystem::path& output_wav);

}  // namespace melvc
