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

#include "wdwada/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "wdwada/errors.hpp"

namespace wdwada {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kAddScalar: return "add_scalar";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kLog: return "log";
    case OpKind::kPow: return "pow";
    case OpKind::kReciprocal: return "reciprocal";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kExpand: return "expand";
    case OpKind::kSumRows: return "sum_rows";
    case OpKind::kBroadcastRows: return "broadcast_rows";
    case OpKind::kSumCols: return "sum_cols";
    case OpKind::kBroadcastCols: return "broadcast_cols";
    case OpKind::kL2Norm: return "l2norm";
    case OpKind::kRowL2Norm: return "row_l2norm";
    case OpKind::kReshape: return "reshape";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kMaxPool1d: return "maxpool1d";
  }
  return "?";
}

const Tensor& Var::value() const { return tape_->node(id_).value; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(OpKind op, Tensor value, std::span<const Var> inputs, OpAttr attr) {
  Node node;
  node.op = op;
  node.value = std::move(value);
  node.attr = std::move(attr);
  bool needs = false;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (&inputs[i].tape() != this) throw ContractError(std::string(op_name(op)) + ": inputs live on different tapes");
    node.inputs[i] = static_cast<std::int64_t>(inputs[i].id());
    needs = needs || inputs[i].requires_grad();
  }
  node.requires_grad = grad_enabled_ && needs;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

Var record1(OpKind op, Tensor value, Var a, OpAttr attr = {}) {
  const Var in[] = {a};
  return a.tape().record(op, std::move(value), in, std::move(attr));
}

Var record2(OpKind op, Tensor value, Var a, Var b, OpAttr attr = {}) {
  const Var in[] = {a, b};
  return a.tape().record(op, std::move(value), in, std::move(attr));
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " expects a matrix, got " + shape_string(t.shape()));
}

// Binary elementwise ops accept equal shapes or a single-element operand.
Shape broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return a.shape();
  if (a.numel() == 1) return b.shape();
  if (b.numel() == 1) return a.shape();
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

template <typename F>
Tensor zip(const Shape& out_shape, const Tensor& a, const Tensor& b, F f) {
  Tensor out(out_shape);
  const bool sa = a.numel() == 1 && a.shape() != out_shape;
  const bool sb = b.numel() == 1 && b.shape() != out_shape;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = f(sa ? a[0] : a[i], sb ? b[0] : b[i]);
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = f(a[i]);
  return out;
}

// Sums a broadcast gradient back to the operand's shape.
Var reduce_to(Var g, const Shape& shape) {
  if (g.shape() == shape) return g;
  return reshape(sum(g), shape);
}

Tensor raw_matmul(const Tensor& a, const Tensor& b) {
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  MutMap(out.data().data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  return out;
}

}  // namespace

std::size_t conv_output_length(std::size_t len, std::size_t kernel, std::size_t stride) {
  if (stride == 0 || kernel == 0) throw DimensionError("kernel and stride must be positive");
  if (len < kernel) {
    throw DimensionError("input length " + std::to_string(len) + " is shorter than kernel " + std::to_string(kernel));
  }
  return (len - kernel) / stride + 1;
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  }
  return record2(OpKind::kMatMul, raw_matmul(av, bv), a, b);
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  require_matrix("transpose", av);
  const auto m = av.dim(0), n = av.dim(1);
  Tensor out({n, m});
  MutMap(out.data().data(), n, m) = ConstMap(av.data().data(), m, n).transpose();
  return record1(OpKind::kTranspose, std::move(out), a);
}

Var add(Var a, Var b) {
  auto shape = broadcast_shape("add", a.value(), b.value());
  return record2(OpKind::kAdd, zip(shape, a.value(), b.value(), [](double x, double y) { return x + y; }), a, b);
}

Var sub(Var a, Var b) {
  auto shape = broadcast_shape("sub", a.value(), b.value());
  return record2(OpKind::kSub, zip(shape, a.value(), b.value(), [](double x, double y) { return x - y; }), a, b);
}

Var mul(Var a, Var b) {
  auto shape = broadcast_shape("mul", a.value(), b.value());
  return record2(OpKind::kMul, zip(shape, a.value(), b.value(), [](double x, double y) { return x * y; }), a, b);
}

Var scale(Var a, double factor) {
  OpAttr attr;
  attr.scalar = factor;
  return record1(OpKind::kScale, map(a.value(), [factor](double x) { return x * factor; }), a, std::move(attr));
}

Var add_scalar(Var a, double offset) {
  OpAttr attr;
  attr.scalar = offset;
  return record1(OpKind::kAddScalar, map(a.value(), [offset](double x) { return x + offset; }), a, std::move(attr));
}

Var relu(Var a) { return record1(OpKind::kRelu, map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }), a); }

Var sigmoid(Var a) {
  return record1(OpKind::kSigmoid, map(a.value(), [](double x) {
                   if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
                   const double e = std::exp(x);
                   return e / (1.0 + e);
                 }),
                 a);
}

Var log(Var a) {
  return record1(OpKind::kLog, map(a.value(), [](double x) { return std::log(std::max(x, kLogFloor)); }), a);
}

Var pow(Var a, double exponent) {
  OpAttr attr;
  attr.scalar = exponent;
  return record1(OpKind::kPow, map(a.value(), [exponent](double x) { return std::pow(x, exponent); }), a,
                 std::move(attr));
}

Var reciprocal(Var a) {
  return record1(OpKind::kReciprocal, map(a.value(), [](double x) { return x == 0.0 ? 0.0 : 1.0 / x; }), a);
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return record1(OpKind::kSum, Tensor::scalar(s), a);
}

Var mean(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return record1(OpKind::kMean, Tensor::scalar(s / static_cast<double>(a.value().numel())), a);
}

Var expand(Var scalar, Shape shape) {
  if (scalar.value().numel() != 1) {
    throw DimensionError("expand: source must hold one element, got " + shape_string(scalar.shape()));
  }
  OpAttr attr;
  attr.shape = shape;
  return record1(OpKind::kExpand, Tensor::full(std::move(shape), scalar.value()[0]), scalar, std::move(attr));
}

Var sum_rows(Var a) {
  const Tensor& av = a.value();
  require_matrix("sum_rows", av);
  const auto m = av.dim(0), n = av.dim(1);
  Tensor out({n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
  return record1(OpKind::kSumRows, std::move(out), a);
}

Var broadcast_rows(Var v, std::size_t m) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1) throw DimensionError("broadcast_rows expects a vector, got " + shape_string(vv.shape()));
  const auto n = vv.dim(0);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = vv[j];
  return record1(OpKind::kBroadcastRows, std::move(out), v);
}

Var sum_cols(Var a) {
  const Tensor& av = a.value();
  require_matrix("sum_cols", av);
  const auto m = av.dim(0), n = av.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i] += av[i * n + j];
  return record1(OpKind::kSumCols, std::move(out), a);
}

Var broadcast_cols(Var v, std::size_t n) {
  const Tensor& vv = v.value();
  if (vv.rank() != 1) throw DimensionError("broadcast_cols expects a vector, got " + shape_string(vv.shape()));
  const auto m = vv.dim(0);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = vv[i];
  return record1(OpKind::kBroadcastCols, std::move(out), v);
}

Var l2norm(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x * x;
  return record1(OpKind::kL2Norm, Tensor::scalar(std::sqrt(s)), a);
}

Var row_l2norm(Var a) {
  const Tensor& av = a.value();
  require_matrix("row_l2norm", av);
  const auto m = av.dim(0), n = av.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += av[i * n + j] * av[i * n + j];
    out[i] = std::sqrt(s);
  }
  return record1(OpKind::kRowL2Norm, std::move(out), a);
}

Var reshape(Var a, Shape shape) {
  OpAttr attr;
  attr.shape = a.shape();
  return record1(OpKind::kReshape, a.value().reshaped(std::move(shape)), a, std::move(attr));
}

Var add_row_bias(Var x, Var bias) {
  require_matrix("add_row_bias", x.value());
  if (bias.value().rank() != 1 || bias.value().dim(0) != x.value().dim(1)) {
    throw DimensionError("add_row_bias: bias " + shape_string(bias.shape()) + " does not fit " +
                         shape_string(x.shape()));
  }
  return add(x, broadcast_rows(bias, x.value().dim(0)));
}

Var affine(Var x, Var weight, Var bias) { return add_row_bias(matmul(x, weight), bias); }

Var conv1d(Var input, Var filters, Var bias, std::size_t stride) {
  const Tensor& x = input.value();
  const Tensor& w = filters.value();
  const Tensor& b = bias.value();
  if (x.rank() != 3 || w.rank() != 3 || w.dim(1) != x.dim(1) || b.rank() != 1 || b.dim(0) != w.dim(0)) {
    throw DimensionError("conv1d: incompatible input " + shape_string(x.shape()) + ", filters " +
                         shape_string(w.shape()) + ", bias " + shape_string(b.shape()));
  }
  const auto batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  const auto out_ch = w.dim(0), kernel = w.dim(2);
  const auto out_len = conv_output_length(len, kernel, stride);
  Tensor y({batch, out_ch, out_len});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_ch; ++o) {
      for (std::size_t t = 0; t < out_len; ++t) {
        double acc = b[o];
        for (std::size_t c = 0; c < ch; ++c) {
          const double* xr = &x.data()[(n * ch + c) * len + t * stride];
          const double* wr = &w.data()[(o * ch + c) * kernel];
          for (std::size_t k = 0; k < kernel; ++k) acc += wr[k] * xr[k];
        }
        y[(n * out_ch + o) * out_len + t] = acc;
      }
    }
  }
  OpAttr attr;
  attr.stride = stride;
  const Var in[] = {input, filters, bias};
  return input.tape().record(OpKind::kConv1d, std::move(y), in, std::move(attr));
}

Var maxpool1d(Var input, std::size_t window, std::size_t stride) {
  const Tensor& x = input.value();
  if (x.rank() != 3) throw DimensionError("maxpool1d expects [batch x ch x len], got " + shape_string(x.shape()));
  const auto batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  const auto out_len = conv_output_length(len, window, stride);
  Tensor y({batch, ch, out_len});
  OpAttr attr;
  attr.window = window;
  attr.stride = stride;
  attr.indices.resize(y.numel());
  for (std::size_t r = 0; r < batch * ch; ++r) {
    for (std::size_t t = 0; t < out_len; ++t) {
      std::size_t best = r * len + t * stride;
      for (std::size_t k = 1; k < window; ++k) {
        const std::size_t idx = r * len + t * stride + k;
        if (x[idx] > x[best]) best = idx;
      }
      y[r * out_len + t] = x[best];
      attr.indices[r * out_len + t] = best;
    }
  }
  return record1(OpKind::kMaxPool1d, std::move(y), input, std::move(attr));
}

namespace {

using GradSlots = std::array<std::optional<Var>, 3>;

GradSlots backward_conv1d(Tape& tape, const Tape::Node& node, const Tensor& g, const std::array<bool, 3>& need) {
  const Tensor& x = tape.node(node.inputs[0]).value;
  const Tensor& w = tape.node(node.inputs[1]).value;
  const auto batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  const auto out_ch = w.dim(0), kernel = w.dim(2);
  const auto out_len = node.value.dim(2);
  const auto stride = node.attr.stride;
  Tensor gx(x.shape()), gw(w.shape()), gb({out_ch});
  for (std::size_t n = 0; n < batch; ++n) {
    for (std::size_t o = 0; o < out_ch; ++o) {
      for (std::size_t t = 0; t < out_len; ++t) {
        const double go = g[(n * out_ch + o) * out_len + t];
        if (go == 0.0) continue;
        gb[o] += go;
        for (std::size_t c = 0; c < ch; ++c) {
          const std::size_t xo = (n * ch + c) * len + t * stride;
          const std::size_t wo = (o * ch + c) * kernel;
          for (std::size_t k = 0; k < kernel; ++k) {
            gx[xo + k] += go * w[wo + k];
            gw[wo + k] += go * x[xo + k];
          }
        }
      }
    }
  }
  GradSlots out;
  if (need[0]) out[0] = tape.constant(std::move(gx));
  if (need[1]) out[1] = tape.constant(std::move(gw));
  if (need[2]) out[2] = tape.constant(std::move(gb));
  return out;
}

GradSlots backward(Tape& tape, std::size_t id, Var g, bool create_graph, const std::array<bool, 3>& need) {
  const Tape::Node& node = tape.node(id);
  auto input = [&](int k) { return tape.var(static_cast<std::size_t>(node.inputs[k])); };
  const Var self = tape.var(id);
  GradSlots out;
  switch (node.op) {
    case OpKind::kLeaf:
      break;
    case OpKind::kMatMul:
      if (need[0]) out[0] = matmul(g, transpose(input(1)));
      if (need[1]) out[1] = matmul(transpose(input(0)), g);
      break;
    case OpKind::kTranspose:
      out[0] = transpose(g);
      break;
    case OpKind::kAdd:
      if (need[0]) out[0] = reduce_to(g, input(0).shape());
      if (need[1]) out[1] = reduce_to(g, input(1).shape());
      break;
    case OpKind::kSub:
      if (need[0]) out[0] = reduce_to(g, input(0).shape());
      if (need[1]) out[1] = reduce_to(scale(g, -1.0), input(1).shape());
      break;
    case OpKind::kMul:
      if (need[0]) out[0] = reduce_to(mul(g, input(1)), input(0).shape());
      if (need[1]) out[1] = reduce_to(mul(g, input(0)), input(1).shape());
      break;
    case OpKind::kScale:
      out[0] = scale(g, node.attr.scalar);
      break;
    case OpKind::kAddScalar:
      out[0] = g;
      break;
    case OpKind::kRelu: {
      // relu'(0) := 0; the second derivative is zero almost everywhere.
      Tensor mask = map(input(0).value(), [](double x) { return x > 0.0 ? 1.0 : 0.0; });
      out[0] = mul(g, tape.constant(std::move(mask)));
      break;
    }
    case OpKind::kSigmoid:
      out[0] = mul(g, mul(self, add_scalar(scale(self, -1.0), 1.0)));
      break;
    case OpKind::kLog: {
      Tensor mask = map(input(0).value(), [](double x) { return x >= kLogFloor ? 1.0 : 0.0; });
      out[0] = mul(g, mul(reciprocal(input(0)), tape.constant(std::move(mask))));
      break;
    }
    case OpKind::kPow: {
      const double p = node.attr.scalar;
      if (p == 0.0) {
        out[0] = tape.constant(Tensor(input(0).shape()));
      } else {
        out[0] = mul(g, scale(pow(input(0), p - 1.0), p));
      }
      break;
    }
    case OpKind::kReciprocal:
      out[0] = mul(g, scale(mul(self, self), -1.0));
      break;
    case OpKind::kSum:
      out[0] = expand(g, input(0).shape());
      break;
    case OpKind::kMean:
      out[0] = scale(expand(g, input(0).shape()), 1.0 / static_cast<double>(input(0).value().numel()));
      break;
    case OpKind::kExpand:
      out[0] = reshape(sum(g), input(0).shape());
      break;
    case OpKind::kSumRows:
      out[0] = broadcast_rows(g, input(0).value().dim(0));
      break;
    case OpKind::kBroadcastRows:
      out[0] = sum_rows(g);
      break;
    case OpKind::kSumCols:
      out[0] = broadcast_cols(g, input(0).value().dim(1));
      break;
    case OpKind::kBroadcastCols:
      out[0] = sum_cols(g);
      break;
    case OpKind::kL2Norm:
      // d||a|| / da = a / ||a||; a zero norm yields a zero (sub)gradient.
      out[0] = mul(expand(mul(g, reciprocal(self)), input(0).shape()), input(0));
      break;
    case OpKind::kRowL2Norm:
      out[0] = mul(broadcast_cols(mul(g, reciprocal(self)), input(0).value().dim(1)), input(0));
      break;
    case OpKind::kReshape:
      out[0] = reshape(g, node.attr.shape);
      break;
    case OpKind::kConv1d:
      if (create_graph) throw CapabilityError("conv1d does not support second-order differentiation");
      return backward_conv1d(tape, node, g.value(), need);
    case OpKind::kMaxPool1d: {
      if (create_graph) throw CapabilityError("maxpool1d does not support second-order differentiation");
      Tensor gx(input(0).shape());
      const Tensor& gv = g.value();
      for (std::size_t i = 0; i < gv.numel(); ++i) gx[node.attr.indices[i]] += gv[i];
      out[0] = tape.constant(std::move(gx));
      break;
    }
  }
  return out;
}

// Restores the tape's grad mode on scope exit.
class GradModeScope {
 public:
  GradModeScope(Tape& tape, bool enabled) : tape_(tape), previous_(tape.grad_enabled()) {
    tape.set_grad_enabled(enabled);
  }
  ~GradModeScope() { tape_.set_grad_enabled(previous_); }

 private:
  Tape& tape_;
  bool previous_;
};

}  // namespace

std::vector<Var> grad(Var output, std::span<const Var> wrt, bool create_graph) {
  Tape& tape = output.tape();
  if (output.value().numel() != 1) {
    throw ContractError("grad: output must be a scalar, got shape " + shape_string(output.shape()));
  }
  for (const auto& w : wrt) {
    if (!w.valid() || &w.tape() != &tape) throw ContractError("grad: wrt node is not on the output's tape");
  }

  const std::size_t n = output.id() + 1;
  std::vector<char> relevant(n, 0);
  for (const auto& w : wrt) {
    if (w.id() < n) relevant[w.id()] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (relevant[i]) continue;
    for (auto in : tape.node(i).inputs) {
      if (in >= 0 && relevant[static_cast<std::size_t>(in)]) {
        relevant[i] = 1;
        break;
      }
    }
  }

  GradModeScope mode(tape, create_graph);
  std::vector<std::optional<Var>> grads(n);
  grads[output.id()] = tape.constant(Tensor::full(output.shape(), 1.0));

  for (std::size_t i = n; i-- > 0;) {
    if (!grads[i] || !relevant[i]) continue;
    const Tape::Node& node = tape.node(i);
    if (node.op == OpKind::kLeaf || !node.requires_grad) continue;
    std::array<bool, 3> need{false, false, false};
    bool any = false;
    for (int k = 0; k < 3; ++k) {
      const auto in = node.inputs[k];
      need[k] = in >= 0 && relevant[static_cast<std::size_t>(in)] && tape.node(static_cast<std::size_t>(in)).requires_grad;
      any = any || need[k];
    }
    if (!any) continue;
    auto slots = backward(tape, i, *grads[i], create_graph, need);
    for (int k = 0; k < 3; ++k) {
      if (!need[k] || !slots[k]) continue;
      auto& acc = grads[static_cast<std::size_t>(node.inputs[k])];
      acc = acc ? add(*acc, *slots[k]) : *slots[k];
    }
  }

  std::vector<Var> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() < n && grads[w.id()]) {
      result.push_back(*grads[w.id()]);
    } else {
      result.push_back(tape.constant(Tensor(w.shape())));
    }
  }
  return result;
}

}  // namespace wdwada
