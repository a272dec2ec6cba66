// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace melvc {

inline constexpr int kWorkingRate = 16000;

/// Mono PCM audio. Samples are finite and within [-1, 1]; values outside
/// that range are clipped on construction and counted in `clipped`.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = kWorkingRate;
  std::size_t clipped = 0;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate);

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_seconds() const;
};

/// True for the corpus rates accepted at ingestion (16000, 22050, 24000).
bool is_corpus_rate(int rate);

/// Reads RIFF/WAVE PCM 16-bit mono or stereo. Stereo is averaged to mono.
/// Throws FormatError on malformed headers and UnsupportedError on other codecs.
Waveform read_wav(const std::filesystem::path& path);

/// Parses an in-memory WAV image; `read_wav` is a file wrapper around this.
Waveform parse_wav(std::span<const std::byte> bytes);

/// Writes 16-bit PCM mono. Samples are scaled by 32768 and saturated.
void write_wav(const std::filesystem::path& path, const Waveform& w);

std::vector<std::byte> encode_wav(const Waveform& w);

/// Windowed-sinc polyphase resampler (Kaiser beta 8.6, 64 taps per phase,
/// cutoff at 0.95 of the lower Nyquist). Only corpus rates -> 16000 are supported;
/// 16000 -> 16000 returns the input unchanged.
Waveform resample(const Waveform& w, int target_rate);

/// Expected output length of `resample`: round(len * target / source).
std::size_t resampled_length(std::size_t len, int source_rate, int target_rate);

}  // namespace melvc
