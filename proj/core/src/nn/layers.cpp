// SPDX-License-Identifier: Apache-2.0
#include "melvc/nn/layers.hpp"

#include <vector>

#include "melvc/errors.hpp"

namespace melvc::nn {

DenseLayer DenseLayer::create(ParameterSet& ps, const std::string& name, Index in, Index out, Activation act, Rng& rng,
                              double bias_init) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.activation = act;
  l.weight = ps.add_uniform(name + ".weight", in, out, in, rng);
  l.bias = ps.add_constant(name + ".bias", 1, out, bias_init);
  return l;
}

Var DenseLayer::operator()(Graph& g, ParameterSet& ps, Var x) const {
  return dense(x, g.param(ps[weight]), g.param(ps[bias]), activation);
}

GruLayer GruLayer::create(ParameterSet& ps, const std::string& name, Index in, Index hidden, Rng& rng) {
  GruLayer l;
  l.in = in;
  l.hidden = hidden;
  l.wx = ps.add_uniform(name + ".wx", in, 3 * hidden, in, rng);
  l.wh = ps.add_uniform(name + ".wh", hidden, 3 * hidden, hidden, rng);
  l.bx = ps.add_constant(name + ".bx", 1, 3 * hidden, 0.0);
  l.bh = ps.add_constant(name + ".bh", 1, 3 * hidden, 0.0);
  return l;
}

GruWeights GruLayer::bind(Graph& g, ParameterSet& ps) const {
  return {g.param(ps[wx]), g.param(ps[wh]), g.param(ps[bx]), g.param(ps[bh])};
}

Var GruLayer::step(Graph& g, ParameterSet& ps, Var x, Var h) const { return gru_step(x, h, bind(g, ps)); }

Var GruLayer::zero_state(Graph& g, Index batch) const { return g.constant(Matrix::Zero(batch, hidden)); }

Var GruLayer::run(Graph& g, ParameterSet& ps, Var seq, bool reverse) const {
  const GruWeights w = bind(g, ps);
  return gru_sequence(add_row(matmul(seq, w.wx), w.bx), w.wh, w.bh, reverse);
}

Conv1dLayer Conv1dLayer::create(ParameterSet& ps, const std::string& name, int k, Index in, Index out, Rng& rng) {
  Conv1dLayer l;
  l.k = k;
  l.in = in;
  l.out = out;
  l.kernel = ps.add_uniform(name + ".kernel", k * in, out, k * in, rng);
  l.bias = ps.add_constant(name + ".bias", 1, out, 0.0);
  return l;
}

Var Conv1dLayer::operator()(Graph& g, ParameterSet& ps, Var x, Padding padding) const {
  return add_row(conv1d(x, g.param(ps[kernel]), k, 1, padding), g.param(ps[bias]));
}

Conv2dLayer Conv2dLayer::create(ParameterSet& ps, const std::string& name, int k, int stride, Index in, Index out,
                                Rng& rng) {
  Conv2dLayer l;
  l.k = k;
  l.stride = stride;
  l.in = in;
  l.out = out;
  l.kernel = ps.add_uniform(name + ".kernel", static_cast<Index>(k) * k * in, out, static_cast<Index>(k) * k * in, rng);
  l.bias = ps.add_constant(name + ".bias", 1, out, 0.0);
  return l;
}

Conv2dResult Conv2dLayer::operator()(Graph& g, ParameterSet& ps, Var x, Index height, Index width) const {
  auto r = conv2d(x, height, width, g.param(ps[kernel]), k, stride);
  r.out = add_row(r.out, g.param(ps[bias]));
  return r;
}

SequenceNormLayer SequenceNormLayer::create(ParameterSet& ps, const std::string& name, Index dim) {
  SequenceNormLayer l;
  l.dim = dim;
  l.scale = ps.add_constant(name + ".scale", 1, dim, 1.0);
  l.shift = ps.add_constant(name + ".shift", 1, dim, 0.0);
  return l;
}

Var SequenceNormLayer::operator()(Graph& g, ParameterSet& ps, Var x) const {
  return add_row(mul_row(normalize_columns(x), g.param(ps[scale])), g.param(ps[shift]));
}

HighwayLayer HighwayLayer::create(ParameterSet& ps, const std::string& name, Index dim, Rng& rng) {
  HighwayLayer l;
  l.transform = DenseLayer::create(ps, name + ".H", dim, dim, Activation::relu, rng);
  l.gate = DenseLayer::create(ps, name + ".T", dim, dim, Activation::sigmoid, rng, -1.0);
  return l;
}

Var highway(Var x, Var h_weight, Var h_bias, Var t_weight, Var t_bias) {
  if (x.cols() != h_weight.rows() || h_weight.rows() != h_weight.cols())
    throw ShapeError("highway layer must be square");
  const Var h = dense(x, h_weight, h_bias, Activation::relu);
  const Var t = dense(x, t_weight, t_bias, Activation::sigmoid);
  return add(mul(t, h), mul(affine(t, -1.0, 1.0), x));
}

Var HighwayLayer::operator()(Graph& g, ParameterSet& ps, Var x) const {
  return highway(x, g.param(ps[transform.weight]), g.param(ps[transform.bias]), g.param(ps[gate.weight]),
                 g.param(ps[gate.bias]));
}

AttentionLayer AttentionLayer::create(ParameterSet& ps, const std::string& name, Index query_dim, Index memory_dim,
                                      Index energy_dim, Rng& rng) {
  AttentionLayer l;
  l.query_dim = query_dim;
  l.memory_dim = memory_dim;
  l.energy_dim = energy_dim;
  l.query_weight = ps.add_uniform(name + ".query", query_dim, energy_dim, query_dim, rng);
  l.memory_weight = ps.add_uniform(name + ".memory", memory_dim, energy_dim, memory_dim, rng);
  l.score = ps.add_uniform(name + ".v", energy_dim, 1, energy_dim, rng);
  return l;
}

Var AttentionLayer::keys(Graph& g, ParameterSet& ps, Var memory) const {
  return matmul(memory, g.param(ps[memory_weight]));
}

AttentionLayer::Step AttentionLayer::step(Graph& g, ParameterSet& ps, Var query, Var memory, Var keys_) const {
  if (query.cols() != query_dim || memory.cols() != memory_dim) throw ShapeError("attention dimension mismatch");
  const Var q = matmul(query, g.param(ps[query_weight]));
  const Var energies = matmul(tanh(add_row(keys_, q)), g.param(ps[score]));
  const Var weights = softmax_rows(transpose(energies));
  return {matmul(weights, memory), weights};
}

}  // namespace melvc::nn
