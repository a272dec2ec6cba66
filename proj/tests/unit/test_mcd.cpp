#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "gradcheck.hpp"
#include "melvc/errors.hpp"
#include "melvc/mcd.hpp"

using namespace melvc;

namespace {

MelSpectrogram random_mel(Index frames, Rng& rng) {
  MelSpectrogram m;
  m.frames = testing::random_matrix(frames, 80, rng, 3.0);
  return m;
}

}  // namespace

TEST_CASE("mel cepstrum is an orthonormal DCT-II") {
  Rng rng(1);
  std::vector<double> x(80);
  for (auto& v : x) v = rng.uniform(-2, 2);
  const auto c = mel_cepstrum(x, 79);
  double ex = 0, ec = 0;
  for (double v : x) ex += v * v;
  for (double v : c) ec += v * v;
  CHECK(std::abs(ex - ec) < 1e-9 * ex);
  double mean = 0;
  for (double v : x) mean += v;
  CHECK(std::abs(c[0] - mean / std::sqrt(80.0)) < 1e-12);

  // a pure cosine at basis index 3 lands on coefficient 3 only
  std::vector<double> b(80);
  for (int i = 0; i < 80; ++i) b[i] = std::cos(std::numbers::pi * 3 * (i + 0.5) / 80);
  const auto cb = mel_cepstrum(b);
  for (int k = 0; k <= kMcdOrder; ++k) CHECK(std::abs(cb[k] - (k == 3 ? std::sqrt(40.0) : 0.0)) < 1e-10);
  CHECK_THROWS_AS(mel_cepstrum({}), ParamError);
  CHECK_THROWS_AS(mel_cepstrum(std::span(x).first(10), 13), ParamError);
}

TEST_CASE("mcd basic properties") {
  Rng rng(2);
  const auto a = random_mel(12, rng), b = random_mel(12, rng);
  CHECK(mcd(a, a) == 0.0);
  CHECK(mcd(a, b) > 0.0);
  CHECK(mcd(a, b) == doctest::Approx(mcd(b, a)).epsilon(1e-14));
  MelSpectrogram shifted = b;
  shifted.frames.array() += std::log(4.0);
  CHECK(std::abs(mcd(a, shifted) - mcd(a, b)) < 1e-9);
}

TEST_CASE("mcd value on a known difference") {
  MelSpectrogram a, b;
  a.frames = Matrix::Zero(2, 80);
  b.frames = Matrix::Zero(2, 80);
  // frame 0 differs by 0.5 on basis 1, frame 1 by 1.0 on basis 13 and 0.7 on basis 20 (ignored)
  for (int i = 0; i < 80; ++i) {
    const double s = std::sqrt(2.0 / 80);
    b.frames(0, i) = 0.5 * s * std::cos(std::numbers::pi * 1 * (i + 0.5) / 80);
    b.frames(1, i) = s * std::cos(std::numbers::pi * 13 * (i + 0.5) / 80) +
                     0.7 * s * std::cos(std::numbers::pi * 20 * (i + 0.5) / 80);
  }
  const double expected = 10.0 / std::log(10.0) * std::sqrt(2.0) * (0.5 + 1.0) / 2.0;
  CHECK(std::abs(mcd(a, b) - expected) < 1e-10);
}

TEST_CASE("mcd errors and truncation") {
  Rng rng(3);
  const auto a = random_mel(10, rng), b = random_mel(7, rng);
  CHECK_THROWS_AS(mcd(a, b), ShapeError);
  MelSpectrogram narrow;
  narrow.frames = Matrix::Zero(10, 40);
  CHECK_THROWS_AS(mcd(a, narrow), ShapeError);
  MelSpectrogram empty;
  empty.frames = Matrix::Zero(0, 80);
  CHECK_THROWS_AS(mcd(empty, empty), ParamError);
  CHECK_THROWS_AS(mcd_truncated(a, empty), ParamError);

  MelSpectrogram head = a;
  head.frames.conservativeResize(7, Eigen::NoChange);
  CHECK(mcd_truncated(a, b) == mcd(head, b));
  CHECK(mcd_truncated(b, a) == doctest::Approx(mcd(head, b)).epsilon(1e-14));
}
