#include <cmath>
#include <vector>

#include "doctest.h"
#include "melvc/augment.hpp"
#include "melvc/errors.hpp"
#include "melvc/synthetic.hpp"
#include "oracles.hpp"

using namespace melvc;

TEST_CASE("unit speed is the identity") {
  const auto w = synthetic_utterance(1, 0.5);
  CHECK(time_stretch(w, 1.0).samples == w.samples);
}

TEST_CASE("speed range is enforced") {
  const auto w = synthetic_utterance(1, 0.1);
  CHECK_THROWS_AS(time_stretch(w, 0.4), ParamError);
  CHECK_THROWS_AS(time_stretch(w, 2.1), ParamError);
  CHECK_THROWS_AS(time_stretch(w, std::nan("")), ParamError);
}

TEST_CASE("output length follows 1/speed") {
  const Waveform w(std::vector<double>(16000, 0.1), 16000);
  const auto out = time_stretch(w, 0.8);
  CHECK(std::abs(static_cast<long>(out.size()) - 20000) <= 512);
  for (double speed : kDefaultSpeeds) {
    const auto u = synthetic_utterance(3, 1.3);
    const auto s = time_stretch(u, speed);
    CHECK(std::abs(static_cast<double>(s.size()) * speed - static_cast<double>(u.size())) <= 512.0);
  }
}

TEST_CASE("pitch of a harmonic tone survives stretching") {
  const auto tone = harmonic_tone(150, 1.0);
  for (double speed : kDefaultSpeeds) {
    CAPTURE(speed);
    const auto out = time_stretch(tone, speed);
    const std::span<const double> mid(out.samples.data() + out.size() / 4, out.size() / 2);
    const double f0 = testing::autocorr_pitch_hz(mid, 16000);
    CHECK(std::abs(f0 - 150.0) / 150.0 < 0.05);
  }
}

TEST_CASE("stretched speech keeps its level") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto u = synthetic_utterance(seed, 1.0);
    for (double speed : kDefaultSpeeds) {
      const auto out = time_stretch(u, speed);
      const double db = 20 * std::log10(testing::rms(out.samples) / testing::rms(u.samples));
      CHECK(std::abs(db) <= 3.0);
    }
  }
}

TEST_CASE("corpus expansion order and count") {
  std::vector<Waveform> utts;
  for (int i = 0; i < 3; ++i) utts.push_back(synthetic_utterance(static_cast<std::uint64_t>(i), 0.2));
  const auto all = augment_corpus(utts, kDefaultSpeeds);
  REQUIRE(all.size() == 21);
  for (std::size_t i = 0; i < all.size(); ++i) {
    CHECK(all[i].source_index == i / 7);
    CHECK(all[i].speed == kDefaultSpeeds[i % 7]);
  }
  const std::vector<double> unit{1.0};
  const auto same = augment_corpus(utts, unit);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same[i].audio.samples == utts[i].samples);

  const std::vector<double> pair{0.7, 1.3};
  const auto two = augment_corpus(std::span(utts).first(1), pair);
  const double ratio = static_cast<double>(two[0].audio.size()) / static_cast<double>(two[1].audio.size());
  CHECK(std::abs(ratio / (1.3 / 0.7) - 1.0) < 0.05);
}

TEST_CASE("speed suffixes") {
  CHECK(speed_suffix(0.7) == "_sp0.7");
  CHECK(speed_suffix(1.0) == "_sp1.0");
  CHECK(speed_suffix(1.3) == "_sp1.3");
}
