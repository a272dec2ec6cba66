// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "melvc/audio_io.hpp"

namespace melvc {

/// Speech-shaped test signal: a pulse train with a drifting pitch contour plus
/// breath noise, passed through three moving formant resonators under a
/// syllable-rate envelope. Peak amplitude 0.5; deterministic in `seed`.
Waveform synthetic_utterance(std::uint64_t seed, double seconds, int sample_rate = kWorkingRate);

/// Sum of `harmonics` equal-amplitude harmonics of f0 with peak 0.5.
Waveform harmonic_tone(double f0, double seconds, int harmonics = 8, int sample_rate = kWorkingRate);

}  // namespace melvc
