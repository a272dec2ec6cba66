// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdint>
#include <numeric>
#include <numbers>
#include <string>
#include <vector>

#include "melvc/audio_io.hpp"
#include "melvc/errors.hpp"

namespace melvc {

namespace {

constexpr int kTaps = 64;
constexpr int kHalf = kTaps / 2;
constexpr double kBeta = 8.6;
constexpr double kCutoffFraction = 0.95;

double kaiser(double x, double half_width) {
  const double t = x / half_width;
  if (std::abs(t) > 1.0) return 0.0;
  return std::cyl_bessel_i(0.0, kBeta * std::sqrt(1.0 - t * t)) / std::cyl_bessel_i(0.0, kBeta);
}

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

/// One row of `kTaps` coefficients per output phase. Tap j of phase p weights
/// input sample (base + j - kHalf + 1) where base = floor(n * down / up).
std::vector<double> design_bank(int up, int source_rate, int target_rate) {
  const double lower_nyquist = 0.5 * std::min(source_rate, target_rate);
  // Cutoff expressed in cycles per input sample.
  const double fc = kCutoffFraction * lower_nyquist / source_rate;
  std::vector<double> bank(static_cast<std::size_t>(up) * kTaps);
  for (int p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / up;
    double sum = 0.0;
    for (int j = 0; j < kTaps; ++j) {
      const double x = static_cast<double>(j - kHalf + 1) - frac;
      const double h = 2.0 * fc * sinc(2.0 * fc * x) * kaiser(x, kHalf);
      bank[static_cast<std::size_t>(p) * kTaps + j] = h;
      sum += h;
    }
    for (int j = 0; j < kTaps; ++j) bank[static_cast<std::size_t>(p) * kTaps + j] /= sum;
  }
  return bank;
}

}  // namespace

std::size_t resampled_length(std::size_t len, int source_rate, int target_rate) {
  const auto g = std::gcd(source_rate, target_rate);
  const auto up = static_cast<std::uint64_t>(target_rate / g);
  const auto down = static_cast<std::uint64_t>(source_rate / g);
  return static_cast<std::size_t>((len * up + down / 2) / down);
}

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate != kWorkingRate || !is_corpus_rate(w.sample_rate))
    throw UnsupportedError("unsupported resampling pair " + std::to_string(w.sample_rate) + " -> " +
                           std::to_string(target_rate));
  if (w.sample_rate == target_rate) return w;

  const int g = std::gcd(w.sample_rate, target_rate);
  const int up = target_rate / g;
  const int down = w.sample_rate / g;
  const auto bank = design_bank(up, w.sample_rate, target_rate);

  const std::size_t n_in = w.samples.size();
  const std::size_t n_out = resampled_length(n_in, w.sample_rate, target_rate);
  std::vector<double> out(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const std::uint64_t pos = static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(down);
    const auto base = static_cast<std::int64_t>(pos / static_cast<std::uint64_t>(up));
    const auto phase = static_cast<std::size_t>(pos % static_cast<std::uint64_t>(up));
    const double* taps = bank.data() + phase * kTaps;
    double acc = 0.0;
    for (int j = 0; j < kTaps; ++j) {
      const std::int64_t idx = base + j - kHalf + 1;
      if (idx < 0 || idx >= static_cast<std::int64_t>(n_in)) continue;
      acc += taps[j] * w.samples[static_cast<std::size_t>(idx)];
    }
    out[n] = acc;
  }
  return Waveform(std::move(out), target_rate);
}

}  // namespace melvc
