// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "melvc/types.hpp"

namespace melvc::nn {

/// A named trainable matrix and its gradient accumulator.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
};

class Graph;

/// Handle to a value recorded on a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  bool valid() const { return graph != nullptr && id >= 0; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
};

/// Reverse-mode tape over the fixed primitive set in ops.hpp. Every primitive
/// records its output value and a closure that maps the output gradient to
/// parent gradients; `backward` replays the closures in reverse order.
class Graph {
 public:
  struct Options {
    bool training = false;
    std::uint64_t dropout_seed = 0;
  };

  using BackwardFn = std::function<void(Graph&, const Matrix& out_grad)>;

  Graph() = default;
  explicit Graph(Options options) : options_(options) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Value that never receives a gradient.
  Var constant(Matrix value);
  /// Leaf whose gradient is kept and readable through grad().
  Var leaf(Matrix value);
  /// Leaf bound to a parameter; backward() adds its gradient into p.grad.
  /// Repeated calls with the same parameter return the same Var.
  Var param(Parameter& p);

  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Matrix value, std::span<const Var> parents, BackwardFn fn);

  const Matrix& value(Var v) const;
  /// Gradient of a node after backward(); zeros if none flowed.
  Matrix grad(Var v) const;
  bool requires_grad(Var v) const;

  /// Adds delta into the gradient of v (no-op when v does not require grad).
  void accumulate(Var v, const Matrix& delta);
  /// Adds delta into the block of v's gradient whose top-left corner is (row, col).
  void accumulate_block(Var v, Index row, Index col, const Matrix& delta);
  /// Gradient storage of v (zero-initialized on first use) for in-place
  /// accumulation, or null when v does not require grad.
  Matrix* grad_buffer(Var v);

  /// Seeds d(loss)=1 for a 1x1 loss and propagates to every leaf.
  void backward(Var loss);

  bool training() const { return options_.training; }
  std::uint64_t dropout_seed() const { return options_.dropout_seed; }
  std::uint64_t next_stream() { return stream_counter_++; }

  /// Piecewise-linear ops (relu, max-pool, |.|) fold their branch choices into
  /// this signature. Two evaluations with equal signatures lie on the same
  /// smooth piece of the function.
  void note_decisions(std::uint64_t digest);
  std::uint64_t decision_signature() const { return decisions_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Node& node(Var v);
  const Node& node(Var v) const;

  Options options_;
  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, int> param_ids_;
  std::uint64_t stream_counter_ = 0;
  std::uint64_t decisions_ = 0;
};

}  // namespace melvc::nn
