// SPDX-License-Identifier: Apache-2.0
#include "melvc/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "melvc/errors.hpp"

namespace melvc {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Waveform preemphasize(const Waveform& w, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw ParamError("pre-emphasis coefficient must be in [0, 1)");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  if (w.samples.empty()) return out;
  out.samples[0] = w.samples[0];
  for (std::size_t n = 1; n < w.samples.size(); ++n)
    out.samples[n] = w.samples[n] - alpha * w.samples[n - 1];
  return out;
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (length < 2) return w;
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom);
  return w;
}

Index frame_count(std::size_t n_samples, int frame_length, int hop_length) {
  const auto frame = static_cast<std::size_t>(frame_length);
  if (n_samples < frame) return 0;
  return static_cast<Index>((n_samples - frame) / static_cast<std::size_t>(hop_length) + 1);
}

MelFilterbank build_mel_filterbank(int n_fft, int n_mels, int sample_rate, double fmin, double fmax) {
  if (n_mels < 2) throw ParamError("n_mels must be >= 2");
  if (n_fft < 2 || sample_rate <= 0) throw ParamError("invalid FFT size or sample rate");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= 0.5 * sample_rate))
    throw ParamError("mel range must satisfy 0 <= fmin < fmax <= sr/2");

  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (n_mels + 1));

  MelFilterbank fb;
  fb.n_fft = n_fft;
  fb.sample_rate = sample_rate;
  fb.fmin = fmin;
  fb.fmax = fmax;
  fb.weights = Matrix::Zero(n_mels, n_bins);
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], center = edges[m + 1], hi = edges[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * bin_hz;
      const double rise = (f - lo) / (center - lo);
      const double fall = (hi - f) / (hi - center);
      fb.weights(m, k) = std::max(0.0, std::min(rise, fall));
    }
    if (fb.weights.row(m).maxCoeff() <= 0.0)
      throw ParamError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise n_fft");
  }
  return fb;
}

MelFrontEnd::MelFrontEnd(SpectralConfig config)
    : config_(config),
      filterbank_(build_mel_filterbank(config.n_fft, config.n_mels, config.sample_rate, config.fmin, config.fmax)),
      window_(hann_window(static_cast<std::size_t>(config.frame_length))),
      fft_(static_cast<std::size_t>(config.n_fft)) {
  if (config.frame_length > config.n_fft) throw ParamError("frame length exceeds FFT size");
  if (config.hop_length <= 0) throw ParamError("hop must be positive");
}

Matrix MelFrontEnd::power_spectrogram(const Waveform& w) const {
  if (w.sample_rate != config_.sample_rate)
    throw ParamError("front end expects " + std::to_string(config_.sample_rate) + " Hz input");
  const Index frames = frame_count(w.samples.size(), config_.frame_length, config_.hop_length);
  if (frames == 0)
    throw TooShortError("input has " + std::to_string(w.samples.size()) + " samples, need at least " +
                        std::to_string(config_.frame_length));
  Matrix out(frames, config_.n_bins());
  std::vector<double> frame(static_cast<std::size_t>(config_.frame_length));
  for (Index t = 0; t < frames; ++t) {
    const auto start = static_cast<std::size_t>(t) * static_cast<std::size_t>(config_.hop_length);
    for (std::size_t i = 0; i < frame.size(); ++i) frame[i] = w.samples[start + i] * window_[i];
    const auto p = fft_.power(frame);
    for (Index k = 0; k < out.cols(); ++k) out(t, k) = p[static_cast<std::size_t>(k)];
  }
  return out;
}

RowVector MelFrontEnd::mel_from_power(std::span<const double> power) const {
  if (static_cast<Index>(power.size()) != filterbank_.n_bins()) throw ParamError("power frame size mismatch");
  const Eigen::Map<const Vector> p(power.data(), static_cast<Index>(power.size()));
  const Vector energies = filterbank_.weights * p;
  return energies.array().max(config_.log_floor).log().matrix().transpose();
}

MelSpectrogram MelFrontEnd::mel_spectrogram(const Waveform& w) const {
  const Matrix power = power_spectrogram(preemphasize(w, config_.preemphasis));
  MelSpectrogram mel;
  mel.sample_rate = config_.sample_rate;
  mel.frame_ms = config_.frame_ms();
  mel.hop_ms = config_.hop_ms();
  mel.frames = (power * filterbank_.weights.transpose()).array().max(config_.log_floor).log().matrix();
  return mel;
}

const MelFrontEnd& default_front_end() {
  static const MelFrontEnd front_end{SpectralConfig{}};
  return front_end;
}

Matrix power_spectrogram(const Waveform& w) { return default_front_end().power_spectrogram(w); }

MelSpectrogram mel_spectrogram(const Waveform& w) { return default_front_end().mel_spectrogram(w); }

int mulaw_encode(double x) {
  x = std::clamp(x, -1.0, 1.0);
  const double u = std::copysign(std::log1p(255.0 * std::abs(x)) / std::log(256.0), x);
  const double code = std::floor(127.5 + 127.5 * u + 0.5);
  return static_cast<int>(std::clamp(code, 0.0, 255.0));
}

double mulaw_decode(int code) {
  code = std::clamp(code, 0, 255);
  const double u = (static_cast<double>(code) - 127.5) / 127.5;
  return std::copysign((std::pow(256.0, std::abs(u)) - 1.0) / 255.0, u);
}

}  // namespace melvc
