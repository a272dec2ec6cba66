#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "gradient_suite.hpp"
#include "melvc/errors.hpp"
#include "melvc/prosody.hpp"
#include "melvc/synthetic.hpp"

using namespace melvc;

namespace {

std::size_t brute_medoid(const std::vector<RowVector>& xs) {
  std::size_t best = 0;
  double best_cost = INFINITY;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double cost = 0;
    for (const auto& y : xs) cost += (xs[i] - y).norm();
    if (cost < best_cost) {
      best_cost = cost;
      best = i;
    }
  }
  return best;
}

MelSpectrogram random_mel(Index frames, Rng& rng) {
  MelSpectrogram m;
  m.frames = testing::random_matrix(frames, 80, rng, 4.0);
  return m;
}

}  // namespace

TEST_CASE("embedding length does not depend on input length") {
  ReferenceEncoderModel model(ProsodyHyper::full(), 1);
  Rng rng(2);
  for (Index frames : {1, 50, 500}) {
    const auto e = model.reference_encode(random_mel(frames, rng), "u");
    CHECK(e.vector.size() == 128);
    CHECK(e.vector.cwiseAbs().maxCoeff() < 1.0);
    CHECK(e.source_utterance == "u");
  }
  CHECK(ProsodyHyper::full().time_multiple() == 64);
}

TEST_CASE("reference encoder is deterministic and order-sensitive") {
  ReferenceEncoderModel model(ProsodyHyper::toy(), 3);
  const auto mel = mel_spectrogram(synthetic_utterance(8, 0.8));
  const auto a = model.reference_encode(mel);
  CHECK(model.reference_encode(mel).vector == a.vector);
  MelSpectrogram reversed = mel;
  reversed.frames = mel.frames.colwise().reverse();
  CHECK((model.reference_encode(reversed).vector - a.vector).norm() > 1e-6);
  MelSpectrogram wrong;
  wrong.frames = Matrix::Zero(10, 40);
  CHECK_THROWS_AS(model.reference_encode(wrong), ShapeError);
  wrong.frames = Matrix::Zero(0, 80);
  CHECK_THROWS_AS(model.reference_encode(wrong), ShapeError);
}

TEST_CASE("reference encoder gradients") {
  const auto cases = testing::composed_cases();
  const auto it = std::find_if(cases.begin(), cases.end(), [](const auto& c) { return c.name == "prosody_encoder"; });
  REQUIRE(it != cases.end());
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto r = it->run(seed);
    INFO(r.worst);
    CHECK(r.max_rel < 1e-4);
  }
}

TEST_CASE("medoid selection") {
  CHECK(select_medoid(std::vector<RowVector>{RowVector::Zero(3)}) == 0);
  std::vector<RowVector> line;
  for (double p : {0.0, 1.0, 10.0}) line.push_back(RowVector::Constant(1, p));
  CHECK(select_medoid(line) == 1);
  CHECK_THROWS_AS(select_medoid(std::vector<RowVector>{}), ParamError);
  // Exact ties resolve to the first index.
  std::vector<RowVector> tie{RowVector::Constant(1, 0.0), RowVector::Constant(1, 1.0)};
  CHECK(select_medoid(tie) == 0);

  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(64);
    std::vector<RowVector> xs;
    for (std::size_t i = 0; i < n; ++i) xs.push_back(testing::random_matrix(1, 8, rng));
    const std::size_t m = select_medoid(xs);
    CHECK(m == brute_medoid(xs));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    std::vector<RowVector> shuffled;
    for (auto p : perm) shuffled.push_back(xs[p]);
    CHECK(perm[select_medoid(shuffled)] == m);
  }
}

TEST_CASE("medoid over embeddings") {
  std::vector<ProsodyEmbedding> es;
  for (double p : {10.0, 0.0, 1.0}) es.push_back({RowVector::Constant(4, p), "u"});
  CHECK(select_medoid(es) == 2);
}
