// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "melvc/audio_io.hpp"
#include "melvc/dsp.hpp"
#include "melvc/types.hpp"

namespace melvc {

struct LpcConfig {
  int order = 16;
  int sample_rate = kWorkingRate;
  int hop_length = 160;
  int frame_length = 800;
  double lag_window_hz = 40.0;
  double white_noise_correction = 1e-5;
  double power_floor = 1e-10;
};

/// Per-frame all-pole predictors, x^[n] = sum_i coeffs(t, i-1) * x[n - i].
struct LpcTrack {
  Matrix coeffs;             // T x M
  std::vector<double> gain;  // final prediction-error energy per frame
  Matrix reflection;         // T x M
  int hop_length = 160;
  int frame_length = 800;

  Index num_frames() const { return coeffs.rows(); }
  int order() const { return static_cast<int>(coeffs.cols()); }

  /// Frame whose analysis window is centered on sample n (clamped to [0, T-1]).
  Index frame_for_sample(std::size_t n) const;

  /// Longest waveform the track covers: T * hop + frame_length - 1 samples.
  std::size_t max_samples() const;

  /// Builds a track from raw predictor rows, deriving reflection coefficients by
  /// step-down recursion. Throws StabilityError if any |k| >= 1. Gains are set to 1.
  static LpcTrack from_coefficients(Matrix coeffs, int hop_length = 160, int frame_length = 800);
};

struct LpcSolution {
  std::vector<double> coeffs;      // a[1..M]
  std::vector<double> reflection;  // k[1..M]
  std::vector<double> errors;      // E_0 = r[0], ..., E_M
  double error() const { return errors.back(); }
};

/// Levinson-Durbin recursion. Throws ParamError when r[0] <= 0 and
/// NotPositiveDefiniteError when a reflection coefficient reaches magnitude 1.
LpcSolution levinson_durbin(std::span<const double> r, int order);

/// Reflection coefficients of a predictor by step-down recursion; throws StabilityError on |k| >= 1.
std::vector<double> reflection_from_coefficients(std::span<const double> coeffs);

/// First order+1 lags of the inverse real FFT of the symmetric spectrum
/// built from a half spectrum of n_fft/2+1 bins. No conditioning applied.
std::vector<double> power_to_autocorrelation(std::span<const double> power, int order);

/// Gaussian lag window exp(-0.5 (2 pi f0 k / fs)^2), k = 0..order.
std::vector<double> gaussian_lag_window(int order, double bandwidth_hz, int sample_rate);

/// power_to_autocorrelation followed by the lag window and r[0] *= (1 + correction).
/// Throws ParamError on negative power.
std::vector<double> autocorr_from_power(std::span<const double> power, int order, const LpcConfig& config = {});

/// Mel -> linear power -> LPC. The filterbank pseudo-inverse is computed once at construction.
class MelLpcAnalyzer {
 public:
  explicit MelLpcAnalyzer(const MelFilterbank& fb, LpcConfig config = {});

  const LpcConfig& config() const { return config_; }
  const Matrix& pseudo_inverse() const { return pinv_; }

  /// max(F+ exp(mel), floor). Throws ParamError on dimension mismatch.
  std::vector<double> mel_to_power(std::span<const double> mel_frame) const;

  LpcSolution frame_lpc(std::span<const double> mel_frame) const;

  LpcTrack analyze(const MelSpectrogram& mel) const;

 private:
  LpcConfig config_;
  Index n_mels_;
  Matrix pinv_;  // n_bins x n_mels
};

std::vector<double> mel_to_power(std::span<const double> mel_frame, const MelFilterbank& fb);

LpcTrack mel_to_lpc(const MelSpectrogram& mel, const MelFilterbank& fb, int order = 16);

/// Analyzer for the default front end filterbank, shared.
const MelLpcAnalyzer& default_lpc_analyzer();

/// e[n] = x[n] - sum_i a_i(frame(n)) x[n-i], zero history before the first sample.
std::vector<double> lpc_residual(std::span<const double> x, const LpcTrack& track);

/// s[n] = e[n] + sum_i a_i(frame(n)) s[n-i]; exact inverse of lpc_residual.
/// Throws StabilityError when the track holds any reflection magnitude >= 1.
std::vector<double> lpc_synthesize(std::span<const double> excitation, const LpcTrack& track);

/// Throws StabilityError if any stored reflection coefficient has magnitude >= 1.
void check_stable(const LpcTrack& track);

}  // namespace melvc
