// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "melvc/augment.hpp"
#include "melvc/conversion.hpp"
#include "melvc/dsp.hpp"
#include "melvc/mel_lpc.hpp"
#include "melvc/vocoder.hpp"

namespace melvc {

enum class Profile { full, toy };

std::string_view profile_name(Profile p);
/// Throws ParamError for anything but "full" or "toy".
Profile parse_profile(std::string_view name);

struct PipelineConfig {
  int sample_rate = 16000;
  double frame_ms = 50.0;
  double hop_ms = 10.0;
  int n_fft = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double preemphasis = 0.97;
  int lpc_order = 16;
  int bn_dim = 256;
  int prosody_dim = 128;
  std::vector<double> speeds = kDefaultSpeeds;
  bool drop_unit_speed = false;
  Profile profile = Profile::full;

  std::uint64_t seed = 0;
  std::uint64_t bn_seed = 1234;

  int conversion_steps = 2000;
  double conversion_lr = 1e-3;
  int vocoder_steps = 5000;
  double vocoder_lr = 1e-3;
  int vocoder_chunk = 320;
  double clip_norm = 1.0;
  double max_decoder_ratio = 2.0;
  bool medoid_originals_only = true;

  std::string corpus_dir = "corpus";
  std::string features_dir = "features";
  std::string model_dir = "model";
  std::string output_dir = "output";

  /// Throws ParamError when a value is out of range or not supported by the front end.
  void validate() const;

  SpectralConfig spectral() const;
  LpcConfig lpc() const;
  ConversionHyper conversion_hyper() const;
  VocoderHyper vocoder_hyper() const;

  /// Speeds actually produced by augmentation (1.0 removed when drop_unit_speed).
  std::vector<double> effective_speeds() const;
};

/// Pretty-printed JSON with keys in declaration order.
std::string config_to_json(const PipelineConfig& cfg);
/// Missing keys keep their defaults. Throws FormatError on malformed JSON,
/// unknown keys, or wrongly typed values.
PipelineConfig config_from_json(std::string_view text);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& cfg);

/// FNV-1a over the compact JSON of the fields that shape features and models
/// (front end, LPC order, widths, profile, bn_seed); schedules, seeds and paths are excluded.
std::string config_hash(const PipelineConfig& cfg);

}  // namespace melvc
