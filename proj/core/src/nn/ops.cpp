// SPDX-License-Identifier: Apache-2.0
#include "melvc/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "melvc/errors.hpp"
#include "melvc/rng.hpp"

namespace melvc::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

Graph& graph_of(Var v) {
  require(v.valid(), "invalid Var");
  return *v.graph;
}

Graph& graph_of(Var a, Var b) {
  require(a.valid() && b.valid() && a.graph == b.graph, "Vars belong to different graphs");
  return *a.graph;
}

std::uint64_t bits_digest(const std::vector<bool>& bits, int id) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(id));
  std::uint64_t word = 0;
  int filled = 0;
  for (bool b : bits) {
    word = (word << 1) | (b ? 1u : 0u);
    if (++filled == 64) {
      h = mix64(h ^ word);
      word = 0;
      filled = 0;
    }
  }
  return mix64(h ^ word ^ static_cast<std::uint64_t>(filled));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require(a.cols() == b.rows(), "matmul inner dimensions differ");
  Matrix out = a.value() * b.value();
  return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& dy) {
    const Matrix& av = gr.value(a);
    const Matrix& bv = gr.value(b);
    if (Matrix* ga = gr.grad_buffer(a)) {
      if (dy.rows() == 1)
        ga->row(0).noalias() += dy.row(0) * bv.transpose();
      else
        ga->noalias() += dy * bv.transpose();
    }
    if (Matrix* gb = gr.grad_buffer(b)) {
      if (av.rows() == 1)
        gb->noalias() += av.row(0).transpose() * dy.row(0);
      else
        gb->noalias() += av.transpose() * dy;
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
  return g.record(a.value() + b.value(), {a, b}, [a, b](Graph& gr, const Matrix& dy) {
    gr.accumulate(a, dy);
    gr.accumulate(b, dy);
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub shape mismatch");
  return g.record(a.value() - b.value(), {a, b}, [a, b](Graph& gr, const Matrix& dy) {
    gr.accumulate(a, dy);
    if (gr.requires_grad(b)) gr.accumulate(b, -dy);
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value());
  return g.record(std::move(out), {a, b}, [a, b](Graph& gr, const Matrix& dy) {
    if (gr.requires_grad(a)) gr.accumulate(a, dy.cwiseProduct(gr.value(b)));
    if (gr.requires_grad(b)) gr.accumulate(b, dy.cwiseProduct(gr.value(a)));
  });
}

Var add_row(Var x, Var row) {
  Graph& g = graph_of(x, row);
  require(row.rows() == 1 && row.cols() == x.cols(), "add_row expects a 1 x C row");
  Matrix out = x.value().rowwise() + RowVector(row.value().row(0));
  return g.record(std::move(out), {x, row}, [x, row](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, dy);
    if (gr.requires_grad(row)) gr.accumulate(row, dy.colwise().sum());
  });
}

Var mul_row(Var x, Var row) {
  Graph& g = graph_of(x, row);
  require(row.rows() == 1 && row.cols() == x.cols(), "mul_row expects a 1 x C row");
  const RowVector r = row.value().row(0);
  Matrix out = x.value().array().rowwise() * r.array();
  return g.record(std::move(out), {x, row}, [x, row](Graph& gr, const Matrix& dy) {
    if (gr.requires_grad(x)) {
      const RowVector rv = gr.value(row).row(0);
      Matrix dx = dy.array().rowwise() * rv.array();
      gr.accumulate(x, dx);
    }
    if (gr.requires_grad(row)) gr.accumulate(row, dy.cwiseProduct(gr.value(x)).colwise().sum());
  });
}

Var affine(Var x, double a, double b) {
  Graph& g = graph_of(x);
  Matrix out = (a * x.value().array() + b).matrix();
  return g.record(std::move(out), {x}, [x, a](Graph& gr, const Matrix& dy) { gr.accumulate(x, a * dy); });
}

Var relu(Var x) {
  Graph& g = graph_of(x);
  const Matrix& v = x.value();
  Matrix out = v.cwiseMax(0.0);
  std::vector<bool> active(static_cast<std::size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) active[static_cast<std::size_t>(i)] = v.data()[i] > 0.0;
  g.note_decisions(bits_digest(active, static_cast<int>(g.size())));
  return g.record(std::move(out), {x}, [x](Graph& gr, const Matrix& dy) {
    const Matrix& in = gr.value(x);
    Matrix dx = (in.array() > 0.0).select(dy, 0.0);
    gr.accumulate(x, dx);
  });
}

Var tanh(Var x) {
  Graph& g = graph_of(x);
  Matrix out = x.value().array().tanh().matrix();
  Matrix saved = out;
  return g.record(std::move(out), {x}, [x, y = std::move(saved)](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, dy.cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var sigmoid(Var x) {
  Graph& g = graph_of(x);
  Matrix out = x.value().unaryExpr([](double v) { return stable_sigmoid(v); });
  Matrix saved = out;
  return g.record(std::move(out), {x}, [x, y = std::move(saved)](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, dy.cwiseProduct((y.array() * (1.0 - y.array())).matrix()));
  });
}

Var activate(Var x, Activation act) {
  switch (act) {
    case Activation::linear:
      return x;
    case Activation::relu:
      return relu(x);
    case Activation::tanh:
      return tanh(x);
    case Activation::sigmoid:
      return sigmoid(x);
  }
  return x;
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols of nothing");
  Graph& g = graph_of(parts[0]);
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    require(p.graph == &g && p.rows() == rows, "concat_cols row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index off = 0;
  for (const Var& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.record(std::move(out), parts, [saved](Graph& gr, const Matrix& dy) {
    Index o = 0;
    for (const Var& p : saved) {
      const Index c = gr.value(p).cols();
      if (gr.requires_grad(p)) gr.accumulate(p, dy.middleCols(o, c));
      o += c;
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows of nothing");
  Graph& g = graph_of(parts[0]);
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    require(p.graph == &g && p.cols() == cols, "concat_rows column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index off = 0;
  for (const Var& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Var> saved(parts.begin(), parts.end());
  return g.record(std::move(out), parts, [saved](Graph& gr, const Matrix& dy) {
    Index o = 0;
    for (const Var& p : saved) {
      const Index r = gr.value(p).rows();
      if (gr.requires_grad(p)) gr.accumulate(p, dy.middleRows(o, r));
      o += r;
    }
  });
}

Var slice_rows(Var x, Index begin, Index count) {
  Graph& g = graph_of(x);
  require(begin >= 0 && count >= 0 && begin + count <= x.rows(), "slice_rows out of range");
  Matrix out = x.value().middleRows(begin, count);
  return g.record(std::move(out), {x}, [x, begin](Graph& gr, const Matrix& dy) {
    gr.accumulate_block(x, begin, 0, dy);
  });
}

Var slice_cols(Var x, Index begin, Index count) {
  Graph& g = graph_of(x);
  require(begin >= 0 && count >= 0 && begin + count <= x.cols(), "slice_cols out of range");
  Matrix out = x.value().middleCols(begin, count);
  return g.record(std::move(out), {x}, [x, begin](Graph& gr, const Matrix& dy) {
    gr.accumulate_block(x, 0, begin, dy);
  });
}

Var reshape(Var x, Index rows, Index cols) {
  Graph& g = graph_of(x);
  require(rows * cols == x.value().size(), "reshape changes element count");
  Matrix out = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  const Index r0 = x.rows(), c0 = x.cols();
  return g.record(std::move(out), {x}, [x, r0, c0](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, Eigen::Map<const Matrix>(dy.data(), r0, c0));
  });
}

Var transpose(Var x) {
  Graph& g = graph_of(x);
  Matrix out = x.value().transpose();
  return g.record(std::move(out), {x}, [x](Graph& gr, const Matrix& dy) { gr.accumulate(x, dy.transpose()); });
}

Var repeat_rows(Var row, Index n) {
  Graph& g = graph_of(row);
  require(row.rows() == 1 && n >= 1, "repeat_rows expects a 1 x C row");
  Matrix out = row.value().replicate(n, 1);
  return g.record(std::move(out), {row}, [row](Graph& gr, const Matrix& dy) {
    gr.accumulate(row, dy.colwise().sum());
  });
}

Var pad_rows_replicate(Var x, Index before, Index after) {
  Graph& g = graph_of(x);
  require(x.rows() >= 1 && before >= 0 && after >= 0, "pad_rows_replicate needs rows");
  const Index t = x.rows();
  Matrix out(t + before + after, x.cols());
  for (Index i = 0; i < out.rows(); ++i) out.row(i) = x.value().row(std::clamp<Index>(i - before, 0, t - 1));
  return g.record(std::move(out), {x}, [x, before, t](Graph& gr, const Matrix& dy) {
    Matrix dx = Matrix::Zero(t, dy.cols());
    for (Index i = 0; i < dy.rows(); ++i) dx.row(std::clamp<Index>(i - before, 0, t - 1)) += dy.row(i);
    gr.accumulate(x, dx);
  });
}

Var dense(Var x, Var weight, Var bias, Activation act) {
  return activate(add_row(matmul(x, weight), bias), act);
}

Var conv1d(Var x, Var kernel, int k, int stride, Padding padding) {
  Graph& g = graph_of(x, kernel);
  require(k >= 1 && stride >= 1, "conv1d needs k >= 1 and stride >= 1");
  const Index t_in = x.rows();
  const Index c_in = x.cols();
  require(kernel.rows() == k * c_in, "conv1d kernel rows must equal k * C_in");
  Index pad_left = 0;
  Index t_out = 0;
  if (padding == Padding::same) {
    t_out = (t_in + stride - 1) / stride;
    const Index total = std::max<Index>((t_out - 1) * stride + k - t_in, 0);
    pad_left = total / 2;
  } else {
    require(t_in >= k, "conv1d valid padding needs T >= k");
    t_out = (t_in - k) / stride + 1;
  }
  Matrix col = Matrix::Zero(t_out, k * c_in);
  const Matrix& xv = x.value();
  for (Index t = 0; t < t_out; ++t)
    for (int j = 0; j < k; ++j) {
      const Index src = t * stride + j - pad_left;
      if (src >= 0 && src < t_in) col.block(t, j * c_in, 1, c_in) = xv.row(src);
    }
  Matrix out = col * kernel.value();
  return g.record(std::move(out), {x, kernel},
                  [x, kernel, col = std::move(col), k, stride, pad_left, t_in, c_in](Graph& gr, const Matrix& dy) {
                    if (gr.requires_grad(kernel)) gr.accumulate(kernel, col.transpose() * dy);
                    if (gr.requires_grad(x)) {
                      const Matrix dcol = dy * gr.value(kernel).transpose();
                      Matrix dx = Matrix::Zero(t_in, c_in);
                      for (Index t = 0; t < dcol.rows(); ++t)
                        for (int j = 0; j < k; ++j) {
                          const Index src = t * stride + j - pad_left;
                          if (src >= 0 && src < t_in) dx.row(src) += dcol.block(t, j * c_in, 1, c_in);
                        }
                      gr.accumulate(x, dx);
                    }
                  });
}

Conv2dResult conv2d(Var x, Index height, Index width, Var kernel, int k, int stride) {
  Graph& g = graph_of(x, kernel);
  require(k >= 1 && stride >= 1, "conv2d needs k >= 1 and stride >= 1");
  require(x.rows() == height * width, "conv2d rows must equal height * width");
  const Index c_in = x.cols();
  require(kernel.rows() == static_cast<Index>(k) * k * c_in, "conv2d kernel rows must equal k * k * C_in");
  const Index h_out = (height + stride - 1) / stride;
  const Index w_out = (width + stride - 1) / stride;
  const Index pad_top = std::max<Index>((h_out - 1) * stride + k - height, 0) / 2;
  const Index pad_left = std::max<Index>((w_out - 1) * stride + k - width, 0) / 2;

  Matrix col = Matrix::Zero(h_out * w_out, static_cast<Index>(k) * k * c_in);
  const Matrix& xv = x.value();
  for (Index oh = 0; oh < h_out; ++oh)
    for (Index ow = 0; ow < w_out; ++ow)
      for (int dy = 0; dy < k; ++dy) {
        const Index ih = oh * stride + dy - pad_top;
        if (ih < 0 || ih >= height) continue;
        for (int dx = 0; dx < k; ++dx) {
          const Index iw = ow * stride + dx - pad_left;
          if (iw < 0 || iw >= width) continue;
          col.block(oh * w_out + ow, (dy * k + dx) * c_in, 1, c_in) = xv.row(ih * width + iw);
        }
      }
  Matrix out = col * kernel.value();
  Var result = g.record(
      std::move(out), {x, kernel},
      [x, kernel, col = std::move(col), k, stride, pad_top, pad_left, height, width, h_out, w_out, c_in](
          Graph& gr, const Matrix& dyv) {
        if (gr.requires_grad(kernel)) gr.accumulate(kernel, col.transpose() * dyv);
        if (gr.requires_grad(x)) {
          const Matrix dcol = dyv * gr.value(kernel).transpose();
          Matrix dxm = Matrix::Zero(height * width, c_in);
          for (Index oh = 0; oh < h_out; ++oh)
            for (Index ow = 0; ow < w_out; ++ow)
              for (int dy = 0; dy < k; ++dy) {
                const Index ih = oh * stride + dy - pad_top;
                if (ih < 0 || ih >= height) continue;
                for (int dx = 0; dx < k; ++dx) {
                  const Index iw = ow * stride + dx - pad_left;
                  if (iw < 0 || iw >= width) continue;
                  dxm.row(ih * width + iw) += dcol.block(oh * w_out + ow, (dy * k + dx) * c_in, 1, c_in);
                }
              }
          gr.accumulate(x, dxm);
        }
      });
  return {result, h_out, w_out};
}

Var maxpool1d_same(Var x, int width) {
  Graph& g = graph_of(x);
  require(width >= 1, "maxpool width must be >= 1");
  const Matrix& v = x.value();
  const Index t_len = v.rows();
  Matrix out(t_len, v.cols());
  std::vector<Index> arg(static_cast<std::size_t>(v.size()));
  std::vector<bool> bits;
  bits.reserve(arg.size());
  for (Index t = 0; t < t_len; ++t)
    for (Index c = 0; c < v.cols(); ++c) {
      Index best = t;
      for (Index j = t + 1; j < std::min<Index>(t + width, t_len); ++j)
        if (v(j, c) > v(best, c)) best = j;
      out(t, c) = v(best, c);
      arg[static_cast<std::size_t>(t * v.cols() + c)] = best;
      bits.push_back(best != t);
    }
  g.note_decisions(bits_digest(bits, static_cast<int>(g.size())));
  return g.record(std::move(out), {x}, [x, arg = std::move(arg)](Graph& gr, const Matrix& dy) {
    Matrix dx = Matrix::Zero(dy.rows(), dy.cols());
    for (Index t = 0; t < dy.rows(); ++t)
      for (Index c = 0; c < dy.cols(); ++c) dx(arg[static_cast<std::size_t>(t * dy.cols() + c)], c) += dy(t, c);
    gr.accumulate(x, dx);
  });
}

Var softmax_rows(Var x) {
  Graph& g = graph_of(x);
  const Matrix& v = x.value();
  Matrix out(v.rows(), v.cols());
  for (Index r = 0; r < v.rows(); ++r) {
    const double m = v.row(r).maxCoeff();
    RowVector e = (v.row(r).array() - m).exp().matrix();
    out.row(r) = e / e.sum();
  }
  Matrix saved = out;
  return g.record(std::move(out), {x}, [x, y = std::move(saved)](Graph& gr, const Matrix& dy) {
    Matrix dx(y.rows(), y.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = dy.row(r).dot(y.row(r));
      dx.row(r) = y.row(r).cwiseProduct((dy.row(r).array() - dot).matrix());
    }
    gr.accumulate(x, dx);
  });
}

Var normalize_columns(Var x, double eps) {
  Graph& g = graph_of(x);
  const Matrix& v = x.value();
  require(v.rows() > 0, "normalize_columns needs at least one row");
  const double n = static_cast<double>(v.rows());
  const RowVector mu = v.colwise().mean();
  const Matrix centered = v.rowwise() - mu;
  const RowVector inv_std = ((centered.array().square().colwise().sum() / n) + eps).rsqrt().matrix();
  Matrix out = centered.array().rowwise() * inv_std.array();
  Matrix xhat = out;
  return g.record(std::move(out), {x}, [x, xhat = std::move(xhat), inv_std, n](Graph& gr, const Matrix& dy) {
    const RowVector mean_dy = dy.colwise().mean();
    const RowVector mean_dyx = dy.cwiseProduct(xhat).colwise().sum() / n;
    Matrix dx = (dy.rowwise() - mean_dy) - (xhat.array().rowwise() * mean_dyx.array()).matrix();
    dx.array().rowwise() *= inv_std.array();
    gr.accumulate(x, dx);
  });
}

Var gru_cell(Var gx, Var h, Var wh, Var bh) {
  Graph& g = graph_of(gx, h);
  const Index hid = h.cols();
  require(gx.cols() == 3 * hid && gx.rows() == h.rows(), "gru_cell input projection must be B x 3H");
  require(wh.rows() == hid && wh.cols() == 3 * hid, "gru_cell recurrent weight must be H x 3H");
  require(bh.rows() == 1 && bh.cols() == 3 * hid, "gru_cell recurrent bias must be 1 x 3H");
  const Matrix gh = (h.value() * wh.value()).rowwise() + RowVector(bh.value().row(0));
  const Matrix& gxv = gx.value();
  const Matrix& hv = h.value();
  const Index batch = hv.rows();
  Matrix z(batch, hid), r(batch, hid), n(batch, hid), out(batch, hid);
  for (Index b = 0; b < batch; ++b)
    for (Index j = 0; j < hid; ++j) {
      z(b, j) = stable_sigmoid(gxv(b, j) + gh(b, j));
      r(b, j) = stable_sigmoid(gxv(b, hid + j) + gh(b, hid + j));
      n(b, j) = std::tanh(gxv(b, 2 * hid + j) + r(b, j) * gh(b, 2 * hid + j));
      out(b, j) = (1.0 - z(b, j)) * hv(b, j) + z(b, j) * n(b, j);
    }
  Matrix ghn = gh.middleCols(2 * hid, hid);
  return g.record(std::move(out), {gx, h, wh, bh},
                  [gx, h, wh, bh, z = std::move(z), r = std::move(r), n = std::move(n), ghn = std::move(ghn),
                   hid](Graph& gr, const Matrix& dy) {
                    const Matrix& hv2 = gr.value(h);
                    const Index batch2 = dy.rows();
                    Matrix dgx(batch2, 3 * hid), dgh(batch2, 3 * hid);
                    Matrix dh = Matrix::Zero(batch2, hid);
                    for (Index b = 0; b < batch2; ++b)
                      for (Index j = 0; j < hid; ++j) {
                        const double d = dy(b, j);
                        const double dz = d * (n(b, j) - hv2(b, j));
                        const double dn = d * z(b, j);
                        dh(b, j) = d * (1.0 - z(b, j));
                        const double dpre_n = dn * (1.0 - n(b, j) * n(b, j));
                        const double dr = dpre_n * ghn(b, j);
                        const double dpre_z = dz * z(b, j) * (1.0 - z(b, j));
                        const double dpre_r = dr * r(b, j) * (1.0 - r(b, j));
                        dgx(b, j) = dpre_z;
                        dgx(b, hid + j) = dpre_r;
                        dgx(b, 2 * hid + j) = dpre_n;
                        dgh(b, j) = dpre_z;
                        dgh(b, hid + j) = dpre_r;
                        dgh(b, 2 * hid + j) = dpre_n * r(b, j);
                      }
                    gr.accumulate(gx, dgx);
                    if (gr.requires_grad(h)) gr.accumulate(h, dh + dgh * gr.value(wh).transpose());
                    if (Matrix* gw = gr.grad_buffer(wh)) {
                      if (batch2 == 1)
                        gw->noalias() += hv2.row(0).transpose() * dgh.row(0);
                      else
                        gw->noalias() += hv2.transpose() * dgh;
                    }
                    if (gr.requires_grad(bh)) gr.accumulate(bh, dgh.colwise().sum());
                  });
}

Var gru_sequence(Var gx, Var wh, Var bh, bool reverse) {
  Graph& g = graph_of(gx, wh);
  const Index hid = wh.rows();
  const Index steps = gx.rows();
  require(steps > 0, "gru_sequence needs at least one step");
  require(gx.cols() == 3 * hid, "gru_sequence input projection must be T x 3H");
  require(wh.cols() == 3 * hid, "gru_sequence recurrent weight must be H x 3H");
  require(bh.rows() == 1 && bh.cols() == 3 * hid, "gru_sequence recurrent bias must be 1 x 3H");
  const Matrix& gxv = gx.value();
  const Matrix& whv = wh.value();
  const RowVector bhv = bh.value().row(0);
  Matrix out(steps, hid), prev(steps, hid), z(steps, hid), r(steps, hid), n(steps, hid), ghn(steps, hid);
  RowVector h = RowVector::Zero(hid);
  for (Index i = 0; i < steps; ++i) {
    const Index t = reverse ? steps - 1 - i : i;
    prev.row(t) = h;
    const RowVector gh = h * whv + bhv;
    for (Index j = 0; j < hid; ++j) {
      z(t, j) = stable_sigmoid(gxv(t, j) + gh(j));
      r(t, j) = stable_sigmoid(gxv(t, hid + j) + gh(hid + j));
      n(t, j) = std::tanh(gxv(t, 2 * hid + j) + r(t, j) * gh(2 * hid + j));
      h(j) = (1.0 - z(t, j)) * h(j) + z(t, j) * n(t, j);
    }
    ghn.row(t) = gh.segment(2 * hid, hid);
    out.row(t) = h;
  }
  return g.record(std::move(out), {gx, wh, bh},
                  [gx, wh, bh, reverse, hid, steps, prev = std::move(prev), z = std::move(z), r = std::move(r),
                   n = std::move(n), ghn = std::move(ghn)](Graph& gr, const Matrix& dy) {
                    const Matrix& whv2 = gr.value(wh);
                    Matrix dgx(steps, 3 * hid), dgh(steps, 3 * hid);
                    RowVector carry = RowVector::Zero(hid);
                    for (Index i = steps - 1; i >= 0; --i) {
                      const Index t = reverse ? steps - 1 - i : i;
                      RowVector dh_prev(hid);
                      for (Index j = 0; j < hid; ++j) {
                        const double d = dy(t, j) + carry(j);
                        const double dpre_n = d * z(t, j) * (1.0 - n(t, j) * n(t, j));
                        const double dpre_z = d * (n(t, j) - prev(t, j)) * z(t, j) * (1.0 - z(t, j));
                        const double dpre_r = dpre_n * ghn(t, j) * r(t, j) * (1.0 - r(t, j));
                        dgx(t, j) = dpre_z;
                        dgx(t, hid + j) = dpre_r;
                        dgx(t, 2 * hid + j) = dpre_n;
                        dgh(t, j) = dpre_z;
                        dgh(t, hid + j) = dpre_r;
                        dgh(t, 2 * hid + j) = dpre_n * r(t, j);
                        dh_prev(j) = d * (1.0 - z(t, j));
                      }
                      carry = dh_prev + dgh.row(t) * whv2.transpose();
                    }
                    gr.accumulate(gx, dgx);
                    if (gr.requires_grad(wh)) gr.accumulate(wh, prev.transpose() * dgh);
                    if (gr.requires_grad(bh)) gr.accumulate(bh, dgh.colwise().sum());
                  });
}

Var gru_step(Var x, Var h, const GruWeights& w) {
  return gru_cell(add_row(matmul(x, w.wx), w.bx), h, w.wh, w.bh);
}

Var embedding(Var table, std::span<const int> ids) {
  Graph& g = graph_of(table);
  const Matrix& tv = table.value();
  Matrix out(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tv.rows(), "embedding id out of range");
    out.row(static_cast<Index>(i)) = tv.row(ids[i]);
  }
  std::vector<int> saved(ids.begin(), ids.end());
  return g.record(std::move(out), {table}, [table, saved = std::move(saved)](Graph& gr, const Matrix& dy) {
    Matrix dt = Matrix::Zero(gr.value(table).rows(), gr.value(table).cols());
    for (std::size_t i = 0; i < saved.size(); ++i) dt.row(saved[i]) += dy.row(static_cast<Index>(i));
    gr.accumulate(table, dt);
  });
}

Var dropout(Var x, double rate) {
  Graph& g = graph_of(x);
  if (!g.training() || rate <= 0.0) return x;
  require(rate < 1.0, "dropout rate must be < 1");
  const std::uint64_t stream = g.next_stream();
  const double keep_scale = 1.0 / (1.0 - rate);
  Matrix mask(x.rows(), x.cols());
  for (Index i = 0; i < mask.size(); ++i)
    mask.data()[i] = hash_uniform(g.dropout_seed(), stream, static_cast<std::uint64_t>(i)) >= rate ? keep_scale : 0.0;
  Matrix out = x.value().cwiseProduct(mask);
  return g.record(std::move(out), {x}, [x, mask = std::move(mask)](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, dy.cwiseProduct(mask));
  });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const Index r = x.rows(), c = x.cols();
  return g.record(std::move(out), {x}, [x, r, c](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, Matrix::Constant(r, c, dy(0, 0)));
  });
}

Var mean(Var x) {
  require(x.value().size() > 0, "mean of empty matrix");
  return affine(sum(x), 1.0 / static_cast<double>(x.value().size()), 0.0);
}

Var weighted_sum(Var x, const Matrix& weights) {
  Graph& g = graph_of(x);
  require(weights.rows() == x.rows() && weights.cols() == x.cols(), "weighted_sum shape mismatch");
  Matrix out(1, 1);
  out(0, 0) = x.value().cwiseProduct(weights).sum();
  return g.record(std::move(out), {x}, [x, weights](Graph& gr, const Matrix& dy) {
    gr.accumulate(x, dy(0, 0) * weights);
  });
}

Var l1_loss(Var pred, const Matrix& target) {
  Graph& g = graph_of(pred);
  require(target.rows() == pred.rows() && target.cols() == pred.cols(), "l1_loss shape mismatch");
  require(target.size() > 0, "l1_loss on empty matrix");
  const Matrix diff = pred.value() - target;
  Matrix out(1, 1);
  out(0, 0) = diff.cwiseAbs().mean();
  std::vector<bool> sign(static_cast<std::size_t>(diff.size()));
  for (Index i = 0; i < diff.size(); ++i) sign[static_cast<std::size_t>(i)] = diff.data()[i] > 0.0;
  g.note_decisions(bits_digest(sign, static_cast<int>(g.size())));
  const double scale = 1.0 / static_cast<double>(diff.size());
  Matrix sgn = diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
  return g.record(std::move(out), {pred}, [pred, sgn = std::move(sgn), scale](Graph& gr, const Matrix& dy) {
    gr.accumulate(pred, (dy(0, 0) * scale) * sgn);
  });
}

Var bce_with_logits(Var logits, const Matrix& target) {
  Graph& g = graph_of(logits);
  require(target.rows() == logits.rows() && target.cols() == logits.cols(), "bce shape mismatch");
  require(target.size() > 0, "bce on empty matrix");
  const Matrix& z = logits.value();
  double acc = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double zi = z.data()[i];
    acc += std::max(zi, 0.0) - zi * target.data()[i] + std::log1p(std::exp(-std::abs(zi)));
  }
  const double scale = 1.0 / static_cast<double>(z.size());
  Matrix out(1, 1);
  out(0, 0) = acc * scale;
  return g.record(std::move(out), {logits}, [logits, target, scale](Graph& gr, const Matrix& dy) {
    const Matrix p = gr.value(logits).unaryExpr([](double v) { return stable_sigmoid(v); });
    gr.accumulate(logits, (dy(0, 0) * scale) * (p - target));
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  Graph& g = graph_of(logits);
  const Matrix& z = logits.value();
  require(static_cast<Index>(targets.size()) == z.rows() && z.rows() > 0, "cross-entropy target count mismatch");
  Matrix prob(z.rows(), z.cols());
  double acc = 0.0;
  for (Index r = 0; r < z.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    require(t >= 0 && t < z.cols(), "cross-entropy target out of range");
    const double m = z.row(r).maxCoeff();
    RowVector e = (z.row(r).array() - m).exp().matrix();
    const double s = e.sum();
    prob.row(r) = e / s;
    acc += -(z(r, t) - m - std::log(s));
  }
  const double scale = 1.0 / static_cast<double>(z.rows());
  Matrix out(1, 1);
  out(0, 0) = acc * scale;
  std::vector<int> saved(targets.begin(), targets.end());
  return g.record(std::move(out), {logits},
                  [logits, prob = std::move(prob), saved = std::move(saved), scale](Graph& gr, const Matrix& dy) {
                    Matrix d = prob;
                    for (std::size_t r = 0; r < saved.size(); ++r) d(static_cast<Index>(r), saved[r]) -= 1.0;
                    gr.accumulate(logits, (dy(0, 0) * scale) * d);
                  });
}

}  // namespace melvc::nn
