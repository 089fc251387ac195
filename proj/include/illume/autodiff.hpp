/*
 * Copyright 2026 The illume Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#ifndef ILLUME_AUTODIFF_HPP
#define ILLUME_AUTODIFF_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "illume/common.hpp"
#include "illume/tensor.hpp"

namespace illume::diff {

// Reverse-mode engine whose backward pass emits ordinary graph nodes, so the
// adjoints themselves stay differentiable. That is what lets the training
// objective contain entries of an input Jacobian and still be trained by a
// second reverse sweep. Values are computed eagerly at construction: reading
// node->value after building a graph is the forward pass.

enum class Op {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kScale,
  kMatmul,
  kTranspose,
  kReshape,
  kTanh,
  kExp,
  kLog,
  kSqrt,
  kSquare,
  kRelu,
  kClampMin,
  kSumAll,
  kSumRows,
  kSumCols,
  kBroadcastAll,
  kBroadcastRows,
  kBroadcastCols,
  kGatherCols,
  kScatterCols,
  kConcatCols,
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Op op = Op::kLeaf;
  std::vector<NodePtr> inputs;
  Tensor value;
  double scalar = 0.0;                 // kScale factor, kClampMin floor
  std::vector<std::size_t> meta;       // indices / target shapes per op
  std::uint64_t id = 0;
  bool requires_grad = true;           // kConst never accumulates an adjoint
};

namespace detail {
inline std::uint64_t next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline NodePtr make(Op op, std::vector<NodePtr> inputs, Tensor value) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->inputs = std::move(inputs);
  n->value = std::move(value);
  n->id = next_id();
  return n;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
  if (!a.same_shape(b)) throw dimension_error(std::string(who) + ": shape mismatch");
}
}  // namespace detail

inline NodePtr leaf(Tensor v) { return detail::make(Op::kLeaf, {}, std::move(v)); }

inline NodePtr constant(Tensor v) {
  auto n = detail::make(Op::kConst, {}, std::move(v));
  n->requires_grad = false;
  return n;
}

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
  detail::require_same_shape(a->value, b->value, "add");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b->value[i];
  return detail::make(Op::kAdd, {a, b}, std::move(out));
}

inline NodePtr sub(const NodePtr& a, const NodePtr& b) {
  detail::require_same_shape(a->value, b->value, "sub");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b->value[i];
  return detail::make(Op::kSub, {a, b}, std::move(out));
}

inline NodePtr mul(const NodePtr& a, const NodePtr& b) {
  detail::require_same_shape(a->value, b->value, "mul");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b->value[i];
  return detail::make(Op::kMul, {a, b}, std::move(out));
}

inline NodePtr divide(const NodePtr& a, const NodePtr& b) {
  detail::require_same_shape(a->value, b->value, "div");
  Tensor out = a->value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= b->value[i];
  return detail::make(Op::kDiv, {a, b}, std::move(out));
}

inline NodePtr scale(const NodePtr& a, double s) {
  Tensor out = a->value;
  for (double& v : out.data()) v *= s;
  auto n = detail::make(Op::kScale, {a}, std::move(out));
  n->scalar = s;
  return n;
}

inline NodePtr matmul(const NodePtr& a, const NodePtr& b) {
  const Tensor& A = a->value;
  const Tensor& B = b->value;
  if (A.cols() != B.rows()) throw dimension_error("matmul: inner dimensions disagree");
  const std::size_t m = A.rows(), p = A.cols(), q = B.cols();
  Tensor out = Tensor::zeros({m, q});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < p; ++kk) {
      const double aik = A.at(i, kk);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < q; ++j) out.at(i, j) += aik * B.at(kk, j);
    }
  return detail::make(Op::kMatmul, {a, b}, std::move(out));
}

inline NodePtr transpose(const NodePtr& a) {
  const Tensor& A = a->value;
  Tensor out = Tensor::zeros({A.cols(), A.rows()});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out.at(j, i) = A.at(i, j);
  return detail::make(Op::kTranspose, {a}, std::move(out));
}

inline NodePtr reshape(const NodePtr& a, std::vector<std::size_t> shape) {
  if (Tensor::count(shape) != a->value.size())
    throw dimension_error("reshape: element count changed");
  Tensor out(shape, a->value.data());
  auto n = detail::make(Op::kReshape, {a}, std::move(out));
  n->meta.assign(a->value.shape().begin(), a->value.shape().end());
  return n;
}

namespace detail {
inline NodePtr unary(Op op, const NodePtr& a, const std::function<double(double)>& f) {
  Tensor out = a->value;
  for (double& v : out.data()) v = f(v);
  return make(op, {a}, std::move(out));
}
}  // namespace detail

inline NodePtr tanh(const NodePtr& a) {
  return detail::unary(Op::kTanh, a, [](double v) { return std::tanh(v); });
}

inline NodePtr exp(const NodePtr& a) {
  return detail::unary(Op::kExp, a, [](double v) { return std::exp(v); });
}

inline NodePtr log(const NodePtr& a) {
  for (double v : a->value.data())
    if (v <= 0.0) throw std::domain_error("log: non-positive input");
  return detail::unary(Op::kLog, a, [](double v) { return std::log(v); });
}

inline NodePtr sqrt(const NodePtr& a) {
  return detail::unary(Op::kSqrt, a, [](double v) { return std::sqrt(v); });
}

inline NodePtr square(const NodePtr& a) {
  return detail::unary(Op::kSquare, a, [](double v) { return v * v; });
}

inline NodePtr relu(const NodePtr& a) {
  return detail::unary(Op::kRelu, a, [](double v) { return v > 0.0 ? v : 0.0; });
}

inline NodePtr clamp_min(const NodePtr& a, double floor) {
  auto n = detail::unary(Op::kClampMin, a,
                         [floor](double v) { return v < floor ? floor : v; });
  n->scalar = floor;
  return n;
}

inline NodePtr sum_all(const NodePtr& a) {
  double s = 0.0;
  for (double v : a->value.data()) s += v;
  auto n = detail::make(Op::kSumAll, {a}, Tensor::scalar(s));
  n->meta.assign(a->value.shape().begin(), a->value.shape().end());
  return n;
}

/// n×k -> 1×k column sums.
inline NodePtr sum_rows(const NodePtr& a) {
  const Tensor& A = a->value;
  Tensor out = Tensor::zeros({1, A.cols()});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out.at(0, j) += A.at(i, j);
  auto n = detail::make(Op::kSumRows, {a}, std::move(out));
  n->meta = {A.rows()};
  return n;
}

/// n×k -> n×1 row sums.
inline NodePtr sum_cols(const NodePtr& a) {
  const Tensor& A = a->value;
  Tensor out = Tensor::zeros({A.rows(), 1});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, 0) += A.at(i, j);
  auto n = detail::make(Op::kSumCols, {a}, std::move(out));
  n->meta = {A.cols()};
  return n;
}

/// 1×1 -> r×c.
inline NodePtr broadcast_all(const NodePtr& a, std::size_t r, std::size_t c) {
  if (a->value.size() != 1) throw dimension_error("broadcast_all: source not scalar");
  auto n = detail::make(Op::kBroadcastAll, {a}, Tensor::full({r, c}, a->value[0]));
  n->meta = {r, c};
  return n;
}

/// 1×k -> n×k.
inline NodePtr broadcast_rows(const NodePtr& a, std::size_t n_rows) {
  const Tensor& A = a->value;
  if (A.rows() != 1) throw dimension_error("broadcast_rows: source not a row");
  Tensor out = Tensor::zeros({n_rows, A.cols()});
  for (std::size_t i = 0; i < n_rows; ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) out.at(i, j) = A.at(0, j);
  auto n = detail::make(Op::kBroadcastRows, {a}, std::move(out));
  n->meta = {n_rows};
  return n;
}

/// n×1 -> n×k.
inline NodePtr broadcast_cols(const NodePtr& a, std::size_t n_cols) {
  const Tensor& A = a->value;
  if (A.cols() != 1) throw dimension_error("broadcast_cols: source not a column");
  Tensor out = Tensor::zeros({A.rows(), n_cols});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < n_cols; ++j) out.at(i, j) = A.at(i, 0);
  auto n = detail::make(Op::kBroadcastCols, {a}, std::move(out));
  n->meta = {n_cols};
  return n;
}

/// Select columns by index (duplicates allowed).
inline NodePtr gather_cols(const NodePtr& a, const std::vector<std::size_t>& idx) {
  const Tensor& A = a->value;
  Tensor out = Tensor::zeros({A.rows(), idx.size()});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) {
      if (idx[j] >= A.cols()) throw dimension_error("gather_cols: index out of range");
      out.at(i, j) = A.at(i, idx[j]);
    }
  auto n = detail::make(Op::kGatherCols, {a}, std::move(out));
  n->meta = idx;
  return n;
}

/// Inverse of gather_cols: place columns at idx inside a wider zero matrix,
/// accumulating duplicates.
inline NodePtr scatter_cols(const NodePtr& a, const std::vector<std::size_t>& idx,
                            std::size_t total_cols) {
  const Tensor& A = a->value;
  if (idx.size() != A.cols()) throw dimension_error("scatter_cols: index count mismatch");
  Tensor out = Tensor::zeros({A.rows(), total_cols});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out.at(i, idx[j]) += A.at(i, j);
  auto n = detail::make(Op::kScatterCols, {a}, std::move(out));
  n->meta = idx;
  n->meta.push_back(total_cols);
  return n;
}

inline NodePtr concat_cols(const std::vector<NodePtr>& parts) {
  if (parts.empty()) throw contract_error("concat_cols: no inputs");
  std::size_t rows = parts[0]->value.rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p->value.rows() != rows) throw dimension_error("concat_cols: row mismatch");
    total += p->value.cols();
  }
  Tensor out = Tensor::zeros({rows, total});
  std::size_t off = 0;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < p->value.cols(); ++j)
        out.at(i, off + j) = p->value.at(i, j);
    widths.push_back(p->value.cols());
    off += p->value.cols();
  }
  auto n = detail::make(Op::kConcatCols, parts, std::move(out));
  n->meta = widths;
  return n;
}

// Convenience composites.
inline NodePtr add_const(const NodePtr& a, double c) {
  return add(a, constant(Tensor::full(a->value.shape(), c)));
}
inline NodePtr one_minus(const NodePtr& a) {
  return sub(constant(Tensor::ones(a->value.shape())), a);
}

namespace detail {

inline NodePtr accumulate(NodePtr into, const NodePtr& contrib) {
  return into ? add(into, contrib) : contrib;
}

/// Emit adjoint contributions of `n` to its inputs given upstream adjoint `g`.
inline void push_vjp(const NodePtr& n, const NodePtr& g,
                     std::unordered_map<const Node*, NodePtr>& adj) {
  auto give = [&](const NodePtr& input, const NodePtr& contrib) {
    if (!input->requires_grad && input->inputs.empty()) return;
    adj[input.get()] = accumulate(adj.count(input.get()) ? adj[input.get()] : nullptr, contrib);
  };
  const auto& in = n->inputs;
  switch (n->op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kAdd:
      give(in[0], g);
      give(in[1], g);
      break;
    case Op::kSub:
      give(in[0], g);
      give(in[1], scale(g, -1.0));
      break;
    case Op::kMul:
      give(in[0], mul(g, in[1]));
      give(in[1], mul(g, in[0]));
      break;
    case Op::kDiv:
      give(in[0], divide(g, in[1]));
      give(in[1], scale(mul(g, divide(n, in[1])), -1.0));  // -g * (a/b) / b
      break;
    case Op::kScale:
      give(in[0], scale(g, n->scalar));
      break;
    case Op::kMatmul:
      give(in[0], matmul(g, transpose(in[1])));
      give(in[1], matmul(transpose(in[0]), g));
      break;
    case Op::kTranspose:
      give(in[0], transpose(g));
      break;
    case Op::kReshape:
      give(in[0], reshape(g, n->meta));
      break;
    case Op::kTanh:
      give(in[0], mul(g, one_minus(square(n))));
      break;
    case Op::kExp:
      give(in[0], mul(g, n));
      break;
    case Op::kLog:
      give(in[0], divide(g, in[0]));
      break;
    case Op::kSqrt:
      give(in[0], divide(scale(g, 0.5), n));
      break;
    case Op::kSquare:
      give(in[0], mul(g, scale(in[0], 2.0)));
      break;
    case Op::kRelu: {
      Tensor mask = in[0]->value;
      for (double& v : mask.data()) v = v > 0.0 ? 1.0 : 0.0;
      give(in[0], mul(g, constant(std::move(mask))));
      break;
    }
    case Op::kClampMin: {
      Tensor mask = in[0]->value;
      for (double& v : mask.data()) v = v < n->scalar ? 0.0 : 1.0;
      give(in[0], mul(g, constant(std::move(mask))));
      break;
    }
    case Op::kSumAll: {
      std::size_t r = n->meta.size() == 1 ? 1 : n->meta[0];
      std::size_t c = n->meta.size() == 1 ? n->meta[0] : n->meta[1];
      NodePtr b = broadcast_all(g, r, c);
      give(in[0], n->meta.size() == 1 ? reshape(b, {c}) : b);
      break;
    }
    case Op::kSumRows:
      give(in[0], broadcast_rows(g, n->meta[0]));
      break;
    case Op::kSumCols:
      give(in[0], broadcast_cols(g, n->meta[0]));
      break;
    case Op::kBroadcastAll:
      give(in[0], sum_all(g));
      break;
    case Op::kBroadcastRows:
      give(in[0], sum_rows(g));
      break;
    case Op::kBroadcastCols:
      give(in[0], sum_cols(g));
      break;
    case Op::kGatherCols:
      give(in[0], scatter_cols(g, n->meta, in[0]->value.cols()));
      break;
    case Op::kScatterCols: {
      std::vector<std::size_t> idx(n->meta.begin(), n->meta.end() - 1);
      give(in[0], gather_cols(g, idx));
      break;
    }
    case Op::kConcatCols: {
      std::size_t off = 0;
      for (std::size_t p = 0; p < in.size(); ++p) {
        std::vector<std::size_t> idx(n->meta[p]);
        for (std::size_t j = 0; j < n->meta[p]; ++j) idx[j] = off + j;
        give(in[p], gather_cols(g, idx));
        off += n->meta[p];
      }
      break;
    }
  }
}

inline void collect_reachable(const NodePtr& root, std::vector<NodePtr>& out) {
  std::unordered_set<const Node*> seen;
  std::vector<NodePtr> stack{root};
  while (!stack.empty()) {
    NodePtr n = stack.back();
    stack.pop_back();
    if (!seen.insert(n.get()).second) continue;
    out.push_back(n);
    for (const auto& in : n->inputs) stack.push_back(in);
  }
  // Creation ids ascend from inputs to outputs, so descending id order is a
  // valid reverse-topological order.
  std::sort(out.begin(), out.end(),
            [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });
}

}  // namespace detail

/// Reverse-mode sweep from a scalar root. Returns one gradient *node* per
/// requested leaf (zeros if the leaf is unreachable); the returned nodes are
/// themselves differentiable, which provides the second-order path.
inline std::vector<NodePtr> backward(const NodePtr& root, const std::vector<NodePtr>& wrt) {
  if (root->value.size() != 1) throw contract_error("backward: root is not scalar");
  std::vector<NodePtr> order;
  detail::collect_reachable(root, order);
  std::unordered_map<const Node*, NodePtr> adj;
  adj[root.get()] = constant(Tensor::ones(root->value.shape()));
  for (const NodePtr& n : order) {
    auto it = adj.find(n.get());
    if (it == adj.end()) continue;
    detail::push_vjp(n, it->second, adj);
  }
  std::vector<NodePtr> grads;
  grads.reserve(wrt.size());
  for (const NodePtr& w : wrt) {
    auto it = adj.find(w.get());
    grads.push_back(it != adj.end() ? it->second
                                    : constant(Tensor::zeros(w->value.shape())));
  }
  return grads;
}

/// Jacobian of a graph-built map at leaf x: entry (r, j) = ∂f_r/∂x_j, returned
/// as a p×m node whose entries keep participating in differentiation.
inline NodePtr input_jacobian(const std::function<NodePtr(const NodePtr&)>& f,
                              const NodePtr& x) {
  NodePtr y = f(x);
  const std::size_t p = y->value.size();
  const std::size_t m = x->value.size();
  NodePtr y_row = reshape(y, {1, p});
  std::vector<NodePtr> rows;
  rows.reserve(p);
  for (std::size_t r = 0; r < p; ++r) {
    NodePtr comp = sum_all(gather_cols(y_row, {r}));
    NodePtr grad = backward(comp, {x})[0];
    rows.push_back(reshape(grad, {1, m}));
  }
  // Stack rows: transpose of the column-concatenated transposes.
  std::vector<NodePtr> cols;
  cols.reserve(p);
  for (auto& r : rows) cols.push_back(transpose(r));
  return transpose(concat_cols(cols));
}

/// Adam optimizer state for one tensor-shaped parameter set.
struct AdamState {
  Tensor m;
  Tensor v;
  std::int64_t t = 0;
};

/// Standard Adam update with bias correction, in place.
inline void adam_step(Tensor& params, const Tensor& grad, AdamState& state, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
  if (!params.same_shape(grad)) throw dimension_error("adam_step: grad shape mismatch");
  if (state.t == 0) {
    state.m = Tensor::zeros(params.shape());
    state.v = Tensor::zeros(params.shape());
  }
  if (!state.m.same_shape(params)) throw dimension_error("adam_step: state shape mismatch");
  state.t += 1;
  const double b1t = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double b2t = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / b1t;
    const double vhat = state.v[i] / b2t;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace illume::diff

#endif  // ILLUME_AUTODIFF_HPP
