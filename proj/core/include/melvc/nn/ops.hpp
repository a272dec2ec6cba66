// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "melvc/nn/graph.hpp"

namespace melvc::nn {

enum class Activation { linear, relu, tanh, sigmoid };
enum class Padding { valid, same };

// Elementwise and structural primitives. Shape mismatches throw ShapeError.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// x (N x C) + row (1 x C) broadcast over rows.
Var add_row(Var x, Var row);
/// x (N x C) * row (1 x C) broadcast over rows.
Var mul_row(Var x, Var row);
/// a * x + b, elementwise.
Var affine(Var x, double a, double b);

Var relu(Var x);
Var tanh(Var x);
Var sigmoid(Var x);
Var activate(Var x, Activation act);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var x, Index begin, Index count);
Var slice_cols(Var x, Index begin, Index count);
/// Row-major reinterpretation; rows * cols must be preserved.
Var reshape(Var x, Index rows, Index cols);
Var transpose(Var x);
/// 1 x C -> n x C.
Var repeat_rows(Var row, Index n);
/// Copies the first/last row `before`/`after` times.
Var pad_rows_replicate(Var x, Index before, Index after);

/// y = act(x W + b).
Var dense(Var x, Var weight, Var bias, Activation act);

/// 1-D cross-correlation over time. x: T x C_in, kernel: (k * C_in) x C_out with
/// rows ordered tap-major. `same` pads so that T' = ceil(T / stride).
Var conv1d(Var x, Var kernel, int k, int stride, Padding padding);

struct Conv2dResult {
  Var out;
  Index height;
  Index width;
};
/// 2-D cross-correlation with same padding. x rows index (h * width + w), cols are
/// channels; kernel: (k * k * C_in) x C_out.
Conv2dResult conv2d(Var x, Index height, Index width, Var kernel, int k, int stride);

/// Max over [t, t + width) with stride 1, right edge truncated so T' = T.
Var maxpool1d_same(Var x, int width);

/// Each row normalized to a probability distribution.
Var softmax_rows(Var x);

/// Each column shifted to zero mean and scaled to unit variance over the rows,
/// (x - mean) / sqrt(var + eps) with the biased variance.
Var normalize_columns(Var x, double eps = 1e-5);

/// Gated recurrent cell on precomputed input projections.
/// gx = x Wx + bx (B x 3H, gate order z, r, n); h: B x H.
/// z = s(gx_z + gh_z), r = s(gx_r + gh_r), n = tanh(gx_n + r * gh_n), h' = (1 - z) h + z n,
/// where gh = h Wh + bh.
Var gru_cell(Var gx, Var h, Var wh, Var bh);

/// gru_cell applied over the rows of gx (T x 3H) from a zero state, last row
/// first when `reverse`; returns T x H with row t the state after input t.
Var gru_sequence(Var gx, Var wh, Var bh, bool reverse = false);

struct GruWeights {
  Var wx, wh, bx, bh;
};
Var gru_step(Var x, Var h, const GruWeights& w);

/// Rows of `table` selected by ids.
Var embedding(Var table, std::span<const int> ids);

/// Inverted dropout; identity outside training mode. The mask is a pure
/// function of (graph dropout seed, call index, element index).
Var dropout(Var x, double rate);

// Scalar (1 x 1) reductions.
Var sum(Var x);
Var mean(Var x);
Var weighted_sum(Var x, const Matrix& weights);
Var l1_loss(Var pred, const Matrix& target);
Var bce_with_logits(Var logits, const Matrix& target);
Var softmax_cross_entropy(Var logits, std::span<const int> targets);

}  // namespace melvc::nn
