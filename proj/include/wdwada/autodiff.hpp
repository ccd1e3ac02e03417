// Copyright 2026 The wdwada Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode automatic differentiation.
//
// Every op appends a node to a Tape; node ids are assigned in creation order,
// so the tape is always topologically sorted. grad() walks the tape backwards
// once. When called with create_graph=true the backward computation is itself
// recorded on the same tape, which makes the returned gradients differentiable
// (used by the gradient penalty). Second-order support covers the affine,
// activation and elementwise ops; conv1d and maxpool1d raise CapabilityError
// if their backward is requested with create_graph=true.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "wdwada/tensor.hpp"

namespace wdwada {

// Probabilities are clamped to this floor before taking a log.
inline constexpr double kLogFloor = 1e-12;

enum class OpKind {
  kLeaf,
  kMatMul,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kAddScalar,
  kRelu,
  kSigmoid,
  kLog,
  kPow,
  kReciprocal,
  kSum,
  kMean,
  kExpand,
  kSumRows,
  kBroadcastRows,
  kSumCols,
  kBroadcastCols,
  kL2Norm,
  kRowL2Norm,
  kReshape,
  kConv1d,
  kMaxPool1d,
};

const char* op_name(OpKind kind);

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

struct OpAttr {
  double scalar = 0.0;
  std::size_t stride = 0;
  std::size_t window = 0;
  Shape shape;                       // reshape source / expand target
  std::vector<std::size_t> indices;  // maxpool argmax
};

class Tape {
 public:
  static constexpr std::int64_t kNoInput = -1;

  struct Node {
    OpKind op = OpKind::kLeaf;
    std::array<std::int64_t, 3> inputs{kNoInput, kNoInput, kNoInput};
    Tensor value;
    bool requires_grad = false;
    OpAttr attr;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an op node. requires_grad is derived from the inputs and the
  // current grad mode. Intended for op implementations.
  Var record(OpKind op, Tensor value, std::span<const Var> inputs, OpAttr attr = {});

  bool grad_enabled() const { return grad_enabled_; }
  void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_.at(id); }
  Var var(std::size_t id) { return Var(this, id); }

 private:
  // deque keeps node references stable while the backward pass appends.
  std::deque<Node> nodes_;
  bool grad_enabled_ = true;
};

// Disables recording of requires_grad on a tape for its lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape) : tape_(tape), previous_(tape.grad_enabled()) { tape.set_grad_enabled(false); }
  ~NoGradGuard() { tape_.set_grad_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

// Affine / linear algebra.
Var matmul(Var a, Var b);
Var transpose(Var a);

// Elementwise. Binary ops take equal shapes or a single-element operand.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var relu(Var a);
Var sigmoid(Var a);
Var log(Var a);  // log(max(a, kLogFloor))
Var pow(Var a, double exponent);
Var reciprocal(Var a);  // 1/a, with 1/0 := 0

// Reductions and broadcasts.
Var sum(Var a);
Var mean(Var a);
Var expand(Var scalar, Shape shape);
Var sum_rows(Var a);                        // [m x n] -> [n]
Var broadcast_rows(Var v, std::size_t m);   // [n] -> [m x n]
Var sum_cols(Var a);                        // [m x n] -> [m]
Var broadcast_cols(Var v, std::size_t n);   // [m] -> [m x n]
Var l2norm(Var a);                          // whole tensor -> scalar
Var row_l2norm(Var a);                      // [m x n] -> [m]
Var reshape(Var a, Shape shape);

// x[m x n] + b[n] broadcast over rows.
Var add_row_bias(Var x, Var bias);
// x[m x k] * w[k x n] + b[n].
Var affine(Var x, Var weight, Var bias);

// input [batch x channels x len], filters [out x channels x kernel], bias [out].
// Valid convolution: out_len = (len - kernel) / stride + 1.
Var conv1d(Var input, Var filters, Var bias, std::size_t stride);
// Max over windows; ties resolve to the first index.
Var maxpool1d(Var input, std::size_t window, std::size_t stride);

std::size_t conv_output_length(std::size_t len, std::size_t kernel, std::size_t stride);

// Gradients of a single-element output with respect to `wrt`. Result tensors
// have the shapes of the corresponding wrt nodes (zeros when unreachable).
// With create_graph=true the returned Vars are themselves differentiable.
std::vector<Var> grad(Var output, std::span<const Var> wrt, bool create_graph = false);

}  // namespace wdwada
