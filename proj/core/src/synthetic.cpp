// SPDX-License-Identifier: Apache-2.0
#include "melvc/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "melvc/errors.hpp"
#include "melvc/rng.hpp"

namespace melvc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Resonator {
  double y1 = 0.0, y2 = 0.0;
  double step(double x, double freq, double bw, int rate) {
    const double r = std::exp(-std::numbers::pi * bw / rate);
    const double a1 = 2.0 * r * std::cos(kTwoPi * freq / rate);
    const double a2 = -r * r;
    const double y = (1.0 - r) * x + a1 * y1 + a2 * y2;
    y2 = y1;
    y1 = y;
    return y;
  }
};

Waveform normalized(std::vector<double> x, int rate) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (double& v : x) v *= 0.5 / peak;
  return Waveform(std::move(x), rate);
}

}  // namespace

Waveform synthetic_utterance(std::uint64_t seed, double seconds, int sample_rate) {
  if (!(seconds > 0.0) || sample_rate <= 0) throw ParamError("synthetic utterance needs positive length and rate");
  Rng rng(seed);
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  const double f0_base = rng.uniform(100.0, 180.0);
  const double f0_depth = rng.uniform(0.05, 0.2);
  const double f0_rate = rng.uniform(1.0, 3.0);
  const double syllable_rate = rng.uniform(3.0, 5.0);
  const double phase0 = rng.uniform(0.0, kTwoPi);
  std::array<double, 3> centre{rng.uniform(500, 800), rng.uniform(1100, 1800), rng.uniform(2300, 3000)};
  std::array<double, 3> swing{rng.uniform(80, 200), rng.uniform(150, 400), rng.uniform(100, 300)};
  std::array<double, 3> bw{80.0, 120.0, 180.0};
  std::array<Resonator, 3> res{};

  std::vector<double> x(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    const double f0 = f0_base * (1.0 + f0_depth * std::sin(kTwoPi * f0_rate * t + phase0));
    phase += f0 / sample_rate;
    double source = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      source = 1.0;
    }
    source += 0.02 * rng.normal();
    const double env = 0.55 - 0.45 * std::cos(kTwoPi * syllable_rate * t);
    double y = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double f = centre[k] + swing[k] * std::sin(kTwoPi * syllable_rate * t * (0.5 + 0.25 * k) + k);
      y += res[k].step(source, f, bw[k], sample_rate) / static_cast<double>(k + 1);
    }
    x[i] = env * y;
  }
  return normalized(std::move(x), sample_rate);
}

Waveform harmonic_tone(double f0, double seconds, int harmonics, int sample_rate) {
  if (!(f0 > 0.0) || !(seconds > 0.0) || harmonics < 1 || sample_rate <= 0)
    throw ParamError("harmonic tone needs positive f0, length, harmonic count and rate");
  const auto n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> x(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    for (int h = 1; h <= harmonics; ++h)
      if (h * f0 < sample_rate / 2.0) x[i] += std::sin(kTwoPi * h * f0 * t);
  }
  return normalized(std::move(x), sample_rate);
}

}  // namespace melvc
