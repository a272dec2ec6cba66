// SPDX-License-Identifier: Apache-2.0
#include "melvc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "melvc/dsp.hpp"
#include "melvc/errors.hpp"

namespace melvc {

namespace {

double sample_or_zero(const std::vector<double>& x, std::int64_t i) {
  if (i < 0 || i >= static_cast<std::int64_t>(x.size())) return 0.0;
  return x[static_cast<std::size_t>(i)];
}

/// Normalized cross-correlation between x[a..a+len) and x[b..b+len).
double similarity(const std::vector<double>& x, std::int64_t a, std::int64_t b, int len) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (int i = 0; i < len; ++i) {
    const double u = sample_or_zero(x, a + i);
    const double v = sample_or_zero(x, b + i);
    xy += u * v;
    xx += u * u;
    yy += v * v;
  }
  const double denom = std::sqrt(xx * yy);
  return denom > 0.0 ? xy / denom : 0.0;
}

}  // namespace

Waveform time_stretch(const Waveform& w, double speed, const WsolaConfig& config) {
  if (!(speed >= 0.5 && speed <= 2.0)) throw ParamError("speed must lie in [0.5, 2.0]");
  if (speed == 1.0) return w;

  const auto& x = w.samples;
  const auto n_out = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) / speed));
  Waveform out;
  out.sample_rate = w.sample_rate;
  if (n_out == 0 || x.empty()) {
    out.samples.assign(n_out, 0.0);
    return out;
  }

  const int frame = config.frame_length;
  const int hop = config.synthesis_hop;
  const int overlap = frame - hop;
  const auto window = hann_window(static_cast<std::size_t>(frame));
  const auto last_start = std::max<std::int64_t>(0, static_cast<std::int64_t>(x.size()) - frame);

  std::vector<double> acc(n_out + static_cast<std::size_t>(frame), 0.0);
  std::vector<double> weight(acc.size(), 0.0);

  std::int64_t chosen = 0;
  for (std::size_t k = 0; k * static_cast<std::size_t>(hop) < n_out; ++k) {
    if (k > 0) {
      const std::int64_t continuation = chosen + hop;
      const auto nominal = static_cast<std::int64_t>(std::llround(static_cast<double>(k) * hop * speed));
      double best = -2.0;
      std::int64_t best_pos = std::clamp(nominal, std::int64_t{0}, last_start);
      // Visit shifts by increasing magnitude (negative first) so that strict
      // improvement keeps the smallest shift on ties.
      for (int mag = 0; mag <= config.tolerance; ++mag) {
        for (int sign : {-1, 1}) {
          if (mag == 0 && sign == 1) continue;
          const std::int64_t cand = nominal + sign * mag;
          if (cand < 0 || cand > last_start) continue;
          const double s = similarity(x, continuation, cand, overlap);
          if (s > best) {
            best = s;
            best_pos = cand;
          }
        }
      }
      chosen = best_pos;
    }
    const std::size_t out_pos = k * static_cast<std::size_t>(hop);
    for (int i = 0; i < frame; ++i) {
      acc[out_pos + i] += window[static_cast<std::size_t>(i)] * sample_or_zero(x, chosen + i);
      weight[out_pos + i] += window[static_cast<std::size_t>(i)];
    }
  }

  out.samples.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n)
    out.samples[n] = weight[n] > 1e-6 ? acc[n] / weight[n] : 0.0;
  // Overlap-add of in-range samples with normalized weights stays within [-1, 1].
  return Waveform(std::move(out.samples), w.sample_rate);
}

std::vector<AugmentedUtterance> augment_corpus(std::span<const Waveform> utterances, std::span<const double> speeds,
                                               const WsolaConfig& config) {
  if (utterances.empty() || speeds.empty()) throw ParamError("augment_corpus needs utterances and speeds");
  std::vector<AugmentedUtterance> out;
  out.reserve(utterances.size() * speeds.size());
  for (std::size_t u = 0; u < utterances.size(); ++u)
    for (double speed : speeds) out.push_back({time_stretch(utterances[u], speed, config), speed, u});
  return out;
}

std::string speed_suffix(double speed) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "_sp%.1f", speed);
  return buf;
}

}  // namespace melvc
