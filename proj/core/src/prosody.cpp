// SPDX-License-Identifier: Apache-2.0
#include "melvc/prosody.hpp"

#include <limits>

#include "melvc/errors.hpp"

namespace melvc {

ProsodyHyper ProsodyHyper::toy() {
  ProsodyHyper h;
  for (auto& c : h.channels) c /= 4;
  h.gru_units /= 4;
  h.embedding_dim /= 4;
  return h;
}

Index ProsodyHyper::time_multiple() const {
  Index m = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) m *= stride;
  return m;
}

ProsodyEncoder::ProsodyEncoder(nn::ParameterSet& ps, const std::string& prefix, const ProsodyHyper& hyper, Rng& rng)
    : hyper_(hyper) {
  Index in = 1;
  Index width = hyper.n_mels;
  for (std::size_t i = 0; i < hyper.channels.size(); ++i) {
    convs_.push_back(nn::Conv2dLayer::create(ps, prefix + ".conv" + std::to_string(i), hyper.kernel, hyper.stride, in,
                                             hyper.channels[i], rng));
    in = hyper.channels[i];
    width = (width + hyper.stride - 1) / hyper.stride;
  }
  gru_ = nn::GruLayer::create(ps, prefix + ".gru", width * in, hyper.gru_units, rng);
  projection_ = nn::DenseLayer::create(ps, prefix + ".proj", hyper.gru_units, hyper.embedding_dim,
                                       nn::Activation::tanh, rng);
}

nn::Var ProsodyEncoder::encode(nn::Graph& g, nn::ParameterSet& ps, nn::Var mel) const {
  if (mel.rows() < 1) throw ShapeError("prosody encoder needs at least one frame");
  if (mel.cols() != hyper_.n_mels) throw ShapeError("prosody encoder mel band count mismatch");
  const Index frames = mel.rows();
  const Index multiple = hyper_.time_multiple();
  const Index padded = ((frames + multiple - 1) / multiple) * multiple;
  nn::Var image = mel;
  if (padded != frames) {
    const nn::Var pad = g.constant(Matrix::Constant(padded - frames, hyper_.n_mels, hyper_.pad_value));
    const nn::Var parts[] = {mel, pad};
    image = nn::concat_rows(parts);
  }
  nn::Var x = nn::reshape(image, padded * hyper_.n_mels, 1);
  Index height = padded;
  Index width = hyper_.n_mels;
  for (const auto& conv : convs_) {
    auto r = conv(g, ps, x, height, width);
    x = nn::relu(r.out);
    height = r.height;
    width = r.width;
  }
  const nn::Var seq = nn::reshape(x, height, width * x.cols());
  const nn::Var states = gru_.run(g, ps, seq);
  return projection_(g, ps, nn::slice_rows(states, height - 1, 1));
}

ReferenceEncoderModel::ReferenceEncoderModel(const ProsodyHyper& hyper, std::uint64_t seed) {
  Rng rng(seed);
  encoder_ = ProsodyEncoder(params_, "prosody", hyper, rng);
}

ProsodyEmbedding ReferenceEncoderModel::reference_encode(const MelSpectrogram& mel, std::string utterance_id) {
  nn::Graph g;
  const nn::Var out = encoder_.encode(g, params_, g.constant(mel.frames));
  return {RowVector(out.value().row(0)), std::move(utterance_id)};
}

std::size_t select_medoid(std::span<const RowVector> embeddings) {
  if (embeddings.empty()) throw ParamError("select_medoid needs at least one embedding");
  for (const auto& e : embeddings)
    if (e.size() != embeddings[0].size()) throw ParamError("embeddings differ in dimension");
  std::size_t best = 0;
  double best_total = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < embeddings.size(); ++j) total += (embeddings[i] - embeddings[j]).norm();
    if (total < best_total) {
      best_total = total;
      best = i;
    }
  }
  return best;
}

std::size_t select_medoid(std::span<const ProsodyEmbedding> embeddings) {
  std::vector<RowVector> vs;
  vs.reserve(embeddings.size());
  for (const auto& e : embeddings) vs.push_back(e.vector);
  return select_medoid(vs);
}

}  // namespace melvc
