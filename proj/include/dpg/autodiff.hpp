// Copyright 2026 The dpgdiff Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation over Tensor values.
//
// A Tape records every primitive applied to its Vars in execution order, so
// the node list is topologically sorted by construction. backward() walks it
// once in reverse. Tapes are cheap and meant to be rebuilt for every training
// step. With tracking disabled the same primitives compute identical values
// but nothing is retained for the backward pass.

#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "dpg/tensor.hpp"

namespace dpg {

class Tape;

/// Handle to a node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  explicit Tape(bool tracking = true) : tracking_(tracking) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool tracking() const { return tracking_; }

  /// Value that never receives a gradient.
  Var constant(Tensor value);
  /// Differentiable leaf (parameter or probed input).
  Var leaf(Tensor value);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Populates gradients of `root` with respect to every node on the tape.
  void backward(Var root);
  /// Gradient of the last backward() root wrt `v`; zeros if `v` was not reached.
  Tensor grad(Var v) const;

  // Primitive construction; used by the op functions below.
  using BackwardFn = std::function<void(Tape&, const Tensor& upstream)>;
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);
  /// Accumulation slot for the gradient of node `id` (allocated on demand).
  Tensor& grad_slot(std::size_t id);

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  bool tracking_;
  // deque: references handed out by value() survive later appends.
  std::deque<Node> nodes_;
  std::deque<Tensor> grads_;
};

namespace ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// X[B,n] + b[n] broadcast across rows.
Var add_bias(Var x, Var bias);
/// A[m,k] * B[k,n]; rank-1 left operands are treated as [1,k].
Var matmul(Var a, Var b);
Var scale(Var a, double s);
Var sum(Var a);
Var mean(Var a);
Var square(Var a);
Var sqrt(Var a);
Var tanh(Var a);
/// Euclidean norm of all entries, as a scalar.
Var l2norm(Var a);
/// Concatenation along the last axis; all operands share leading rows.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
Var reshape(Var a, Shape shape);
/// Rows of `table` selected by `indices`, as a [len(indices), C] matrix.
Var gather_rows(Var table, std::vector<std::size_t> indices);
/// Row r of X[B,n] multiplied by the constant coeffs[r].
Var scale_rows(Var x, std::vector<double> coeffs);
/// Row sums: X[B,n] -> [B,1].
Var sum_rows(Var x);
/// Each row divided by its Euclidean norm.
Var normalize_rows(Var x);
/// Identity on values; on the way back each row of the incoming gradient is
/// rescaled to Euclidean norm at most `max_norm`.
Var clip_grad_rows(Var x, double max_norm);

}  // namespace ad
}  // namespace dpg
