// SPDX-License-Identifier: Apache-2.0
#include "melvc/nn/graph.hpp"

#include <string>

#include "melvc/errors.hpp"
#include "melvc/rng.hpp"

namespace melvc::nn {

const Matrix& Var::value() const { return graph->value(*this); }

Graph::Node& Graph::node(Var v) {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw ShapeError("Var does not belong to this graph");
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw ShapeError("Var does not belong to this graph");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Graph::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}, nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, false, {}, nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Graph::param(Parameter& p) {
  if (auto it = param_ids_.find(&p); it != param_ids_.end()) return Var{this, it->second};
  nodes_.push_back(Node{p.value, {}, true, false, {}, &p});
  const int id = static_cast<int>(nodes_.size() - 1);
  param_ids_.emplace(&p, id);
  return Var{this, id};
}

Var Graph::record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Graph::record(Matrix value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || node(p).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(fn) : BackwardFn{}, nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Matrix& Graph::value(Var v) const { return node(v).value; }

Matrix Graph::grad(Var v) const {
  const Node& n = node(v);
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

void Graph::accumulate(Var v, const Matrix& delta) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (delta.rows() != n.value.rows() || delta.cols() != n.value.cols())
    throw ShapeError("gradient shape mismatch in accumulate");
  if (!n.has_grad) {
    n.grad = delta;
    n.has_grad = true;
  } else {
    n.grad += delta;
  }
}

void Graph::accumulate_block(Var v, Index row, Index col, const Matrix& delta) {
  Node& n = node(v);
  if (!n.requires_grad) return;
  if (row < 0 || col < 0 || row + delta.rows() > n.value.rows() || col + delta.cols() > n.value.cols())
    throw ShapeError("gradient block out of range in accumulate_block");
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  n.grad.block(row, col, delta.rows(), delta.cols()) += delta;
}

Matrix* Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

void Graph::backward(Var loss) {
  const Node& l = node(loss);
  if (l.value.rows() != 1 || l.value.cols() != 1) throw ShapeError("backward() needs a 1x1 loss");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  accumulate(loss, Matrix::Ones(1, 1));
  for (auto i = static_cast<std::ptrdiff_t>(loss.id); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad) continue;
    if (n.backward) {
      // Closures only read parent values and accumulate into parents, which
      // never reallocates nodes_, so the reference stays valid.
      n.backward(*this, n.grad);
    }
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
        n.param->grad = Matrix::Zero(n.value.rows(), n.value.cols());
      n.param->grad += n.grad;
    }
  }
}

void Graph::note_decisions(std::uint64_t digest) { decisions_ = mix64(decisions_ ^ digest); }

}  // namespace melvc::nn
