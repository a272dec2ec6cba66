// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "melvc/dsp.hpp"

namespace melvc {

inline constexpr int kMcdOrder = 13;

/// Orthonormal DCT-II of one log-mel frame, coefficients 0..order.
std::vector<double> mel_cepstrum(std::span<const double> log_mel, int order = kMcdOrder);

/// (10 / ln 10) * sqrt(2) * mean_t ||c_a(t) - c_b(t)||, cepstral orders 1..13.
/// Throws ShapeError on differing frame or band counts and ParamError on zero frames.
double mcd(const MelSpectrogram& a, const MelSpectrogram& b);

/// mcd over the first min(T_a, T_b) frames.
double mcd_truncated(const MelSpectrogram& a, const MelSpectrogram& b);

}  // namespace melvc
