// SPDX-License-Identifier: Apache-2.0
#include "melvc/mcd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "melvc/errors.hpp"

namespace melvc {

std::vector<double> mel_cepstrum(std::span<const double> log_mel, int order) {
  const auto n = static_cast<int>(log_mel.size());
  if (n == 0) throw ParamError("empty mel frame");
  if (order < 0 || order >= n) throw ParamError("cepstral order must be below the band count");
  std::vector<double> c(static_cast<std::size_t>(order) + 1);
  for (int k = 0; k <= order; ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += log_mel[i] * std::cos(std::numbers::pi * k * (i + 0.5) / n);
    c[k] = acc * std::sqrt((k == 0 ? 1.0 : 2.0) / n);
  }
  return c;
}

double mcd(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.num_frames() != b.num_frames() || a.n_mels() != b.n_mels())
    throw ShapeError("mcd needs equal shapes, got " + std::to_string(a.num_frames()) + "x" +
                     std::to_string(a.n_mels()) + " and " + std::to_string(b.num_frames()) + "x" +
                     std::to_string(b.n_mels()));
  if (a.num_frames() == 0) throw ParamError("mcd of zero frames");
  double total = 0.0;
  const auto row = [](const Matrix& m, Index t) { return std::span<const double>(m.data() + t * m.cols(), m.cols()); };
  for (Index t = 0; t < a.num_frames(); ++t) {
    const auto ca = mel_cepstrum(row(a.frames, t));
    const auto cb = mel_cepstrum(row(b.frames, t));
    double d2 = 0.0;
    for (int k = 1; k <= kMcdOrder; ++k) d2 += (ca[k] - cb[k]) * (ca[k] - cb[k]);
    total += std::sqrt(d2);
  }
  return 10.0 / std::numbers::ln10 * std::numbers::sqrt2 * total / static_cast<double>(a.num_frames());
}

double mcd_truncated(const MelSpectrogram& a, const MelSpectrogram& b) {
  const Index t = std::min(a.num_frames(), b.num_frames());
  MelSpectrogram ta = a, tb = b;
  ta.frames.conservativeResize(t, Eigen::NoChange);
  tb.frames.conservativeResize(t, Eigen::NoChange);
  return mcd(ta, tb);
}

}  // namespace melvc
