// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "melvc/audio_io.hpp"

namespace melvc {

/// Speed factors used to expand each speaker's corpus.
inline const std::vector<double> kDefaultSpeeds{0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};

struct WsolaConfig {
  int frame_length = 512;
  int synthesis_hop = 256;  // 50% overlap
  int tolerance = 160;
};

/// WSOLA time-scale modification: changes duration by 1/speed while keeping
/// local pitch. Output length is round(len / speed). speed == 1.0 returns the
/// input unchanged. Throws ParamError unless speed is in [0.5, 2.0].
Waveform time_stretch(const Waveform& w, double speed, const WsolaConfig& config = {});

struct AugmentedUtterance {
  Waveform audio;
  double speed = 1.0;
  std::size_t source_index = 0;
};

/// Every utterance at every speed, utterance-major then speed-minor.
std::vector<AugmentedUtterance> augment_corpus(std::span<const Waveform> utterances, std::span<const double> speeds,
                                               const WsolaConfig& config = {});

/// Filename suffix for a speed factor, e.g. 0.7 -> "_sp0.7".
std::string speed_suffix(double speed);

}  // namespace melvc
