// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "melvc/nn/ops.hpp"
#include "melvc/nn/params.hpp"

namespace melvc::nn {

// Layers hold parameter indices into a ParameterSet owned by the model, so a
// model stays copyable without pointer fix-ups.

struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  Activation activation = Activation::linear;
  Index in = 0;
  Index out = 0;

  static DenseLayer create(ParameterSet& ps, const std::string& name, Index in, Index out, Activation act, Rng& rng,
                           double bias_init = 0.0);
  Var operator()(Graph& g, ParameterSet& ps, Var x) const;
};

struct GruLayer {
  std::size_t wx = 0, wh = 0, bx = 0, bh = 0;
  Index in = 0;
  Index hidden = 0;

  static GruLayer create(ParameterSet& ps, const std::string& name, Index in, Index hidden, Rng& rng);
  GruWeights bind(Graph& g, ParameterSet& ps) const;
  Var step(Graph& g, ParameterSet& ps, Var x, Var h) const;
  /// Runs over the rows of `seq` (T x in) from zero state; returns T x hidden.
  Var run(Graph& g, ParameterSet& ps, Var seq, bool reverse = false) const;
  Var zero_state(Graph& g, Index batch = 1) const;
};

struct Conv1dLayer {
  std::size_t kernel = 0;
  std::size_t bias = 0;
  int k = 1;
  Index in = 0;
  Index out = 0;

  static Conv1dLayer create(ParameterSet& ps, const std::string& name, int k, Index in, Index out, Rng& rng);
  Var operator()(Graph& g, ParameterSet& ps, Var x, Padding padding = Padding::same) const;
};

struct Conv2dLayer {
  std::size_t kernel = 0;
  std::size_t bias = 0;
  int k = 3;
  int stride = 2;
  Index in = 0;
  Index out = 0;

  static Conv2dLayer create(ParameterSet& ps, const std::string& name, int k, int stride, Index in, Index out,
                            Rng& rng);
  Conv2dResult operator()(Graph& g, ParameterSet& ps, Var x, Index height, Index width) const;
};

/// normalize_columns over the frames of one sequence, then per-channel scale and shift.
/// The statistics always come from the sequence itself, in training and inference alike.
struct SequenceNormLayer {
  std::size_t scale = 0;
  std::size_t shift = 0;
  Index dim = 0;

  static SequenceNormLayer create(ParameterSet& ps, const std::string& name, Index dim);
  Var operator()(Graph& g, ParameterSet& ps, Var x) const;
};

/// y = T(x) * H(x) + (1 - T(x)) * x with H relu and T sigmoid (bias init -1).
struct HighwayLayer {
  DenseLayer transform;
  DenseLayer gate;

  static HighwayLayer create(ParameterSet& ps, const std::string& name, Index dim, Rng& rng);
  Var operator()(Graph& g, ParameterSet& ps, Var x) const;
};

Var highway(Var x, Var h_weight, Var h_bias, Var t_weight, Var t_bias);

/// Additive attention: e_t = v^T tanh(W_q q + W_e h_t).
struct AttentionLayer {
  std::size_t query_weight = 0;
  std::size_t memory_weight = 0;
  std::size_t score = 0;
  Index query_dim = 0;
  Index memory_dim = 0;
  Index energy_dim = 0;

  struct Step {
    Var context;  // 1 x memory_dim
    Var weights;  // 1 x T
  };

  static AttentionLayer create(ParameterSet& ps, const std::string& name, Index query_dim, Index memory_dim,
                               Index energy_dim, Rng& rng);
  /// Precomputes W_e h_t for every memory row (T x energy_dim).
  Var keys(Graph& g, ParameterSet& ps, Var memory) const;
  Step step(Graph& g, ParameterSet& ps, Var query, Var memory, Var keys) const;
};

}  // namespace melvc::nn
