// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "melvc/audio_io.hpp"
#include "melvc/fft.hpp"
#include "melvc/types.hpp"

namespace melvc {

/// Spectral analysis settings. Defaults: 16 kHz, 50 ms hann frames, 10 ms hop,
/// 1024-point FFT, pre-emphasis 0.97, 80 HTK mel bands over 0-8000 Hz.
struct SpectralConfig {
  int sample_rate = kWorkingRate;
  int frame_length = 800;
  int hop_length = 160;
  int n_fft = 1024;
  int n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double preemphasis = 0.97;
  double log_floor = 1e-5;

  int n_bins() const { return n_fft / 2 + 1; }
  double frame_ms() const { return 1000.0 * frame_length / sample_rate; }
  double hop_ms() const { return 1000.0 * hop_length / sample_rate; }
};

struct MelSpectrogram {
  Matrix frames;  // T x n_mels, natural-log energies
  int sample_rate = kWorkingRate;
  double frame_ms = 50.0;
  double hop_ms = 10.0;

  Index num_frames() const { return frames.rows(); }
  Index n_mels() const { return frames.cols(); }
};

struct MelFilterbank {
  Matrix weights;  // n_mels x (n_fft/2 + 1)
  int n_fft = 0;
  int sample_rate = 0;
  double fmin = 0.0;
  double fmax = 0.0;

  Index n_mels() const { return weights.rows(); }
  Index n_bins() const { return weights.cols(); }
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// y[0] = x[0], y[n] = x[n] - alpha * x[n-1]. Requires alpha in [0, 1).
Waveform preemphasize(const Waveform& w, double alpha);

/// Symmetric hann: 0.5 - 0.5 cos(2 pi n / (L - 1)).
std::vector<double> hann_window(std::size_t length);

/// floor((n - frame) / hop) + 1 for n >= frame, else 0.
Index frame_count(std::size_t n_samples, int frame_length, int hop_length);

/// Triangular HTK-mel filters with centers evenly spaced between mel(fmin) and mel(fmax).
MelFilterbank build_mel_filterbank(int n_fft, int n_mels, int sample_rate, double fmin, double fmax);

/// STFT front end with cached window, FFT plan, and filterbank; immutable after construction.
class MelFrontEnd {
 public:
  explicit MelFrontEnd(SpectralConfig config = {});

  const SpectralConfig& config() const { return config_; }
  const MelFilterbank& filterbank() const { return filterbank_; }
  const std::vector<double>& window() const { return window_; }

  /// T x (n_fft/2+1) hann-windowed |FFT|^2 of the raw (unemphasized) signal.
  /// Throws TooShortError when the input is shorter than one frame.
  Matrix power_spectrogram(const Waveform& w) const;

  /// log(max(F * power, floor)) of the pre-emphasized signal.
  MelSpectrogram mel_spectrogram(const Waveform& w) const;

  /// Applies filterbank + log floor to one power frame.
  RowVector mel_from_power(std::span<const double> power) const;

 private:
  SpectralConfig config_;
  MelFilterbank filterbank_;
  std::vector<double> window_;
  Fft fft_;
};

/// Shared default front end (16 kHz, Table-1 framing, 80 bands).
const MelFrontEnd& default_front_end();

Matrix power_spectrogram(const Waveform& w);
MelSpectrogram mel_spectrogram(const Waveform& w);

/// 8-bit mu-law companding (mu = 255). Inputs are clamped to [-1, 1].
int mulaw_encode(double x);
double mulaw_decode(int code);

}  // namespace melvc
