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
#ifndef ILLUME_METAENC_HPP
#define ILLUME_METAENC_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "illume/autodiff.hpp"
#include "illume/common.hpp"
#include "illume/geometry.hpp"
#include "illume/tensor.hpp"

namespace illume::metaenc {

enum class StabilityMode { kJacobian, kPerturbation };

struct TrainingConfig {
  double lambda_y = 1.0;
  double lambda_st = 1.0;
  double lambda_so = 0.0;
  double lambda_co = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t max_epochs = 100;
  std::size_t pretrain_epochs = 10;
  std::size_t ramp_epochs = 10;
  std::size_t finetune_epochs = 80;
  std::size_t early_stopping_patience = 20;
  double validation_fraction = 0.10;
  StabilityMode stability_mode = StabilityMode::kJacobian;
  std::size_t perturb_dirs = 8;    // perturbation-mode directions per batch
  double perturb_norm = 1e-3;      // ‖δ‖ per sampled direction
  bool record_train_curve = false; // post-epoch fixed-order loss into TrainReport
  std::uint64_t seed = 0;
};

/// 3-layer fully-connected net mapping R^m -> R^{m·k}; the output reshaped to
/// m×k is the instance's transformation. tanh keeps the input Jacobian smooth.
struct MetaEncoderModel {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t alpha = 0;  // target sparsity, 2..m (m = off)
  Tensor w1, b1, w2, b2, w3, b3;

  static std::pair<std::size_t, std::size_t> hidden_dims(std::size_t m) {
    return {std::max<std::size_t>(4 * m, 32), std::max<std::size_t>(2 * m, 16)};
  }

  std::vector<std::size_t> layer_dims() const {
    auto [h1, h2] = hidden_dims(m);
    return {m, h1, h2, m * k};
  }

  static MetaEncoderModel init(std::size_t m, std::size_t k, std::size_t alpha,
                               std::uint64_t seed) {
    if (alpha < 1 || alpha > m) throw contract_error("meta-encoder: alpha out of range");
    MetaEncoderModel md;
    md.m = m;
    md.k = k;
    md.alpha = alpha;
    auto [h1, h2] = hidden_dims(m);
    Rng rng(seed);
    auto glorot = [&rng](std::size_t in, std::size_t out) {
      const double s = std::sqrt(6.0 / static_cast<double>(in + out));
      Tensor t = Tensor::zeros({in, out});
      for (double& v : t.data()) v = rng.uniform(-s, s);
      return t;
    };
    md.w1 = glorot(m, h1);
    md.b1 = Tensor::zeros({1, h1});
    md.w2 = glorot(h1, h2);
    md.b2 = Tensor::zeros({1, h2});
    md.w3 = glorot(h2, m * k);
    md.b3 = Tensor::zeros({1, m * k});
    return md;
  }

  /// Dense per-instance transformation W = f(x), reshaped to m×k.
  Tensor forward_transform(std::span<const double> x) const {
    if (x.size() != m) throw dimension_error("forward_transform: input length != m");
    Tensor out = forward_batch(Tensor({1, m}, std::vector<double>(x.begin(), x.end())));
    return Tensor({m, k}, std::move(out.data()));
  }

  /// Batch forward: n×m -> n×(m·k). Accumulation order matches the graph path
  /// bit for bit.
  Tensor forward_batch(const Tensor& X) const {
    if (X.cols() != m) throw dimension_error("forward_batch: input width != m");
    Tensor h1t = affine(X, w1, b1);
    tanh_inplace(h1t);
    Tensor h2t = affine(h1t, w2, b2);
    tanh_inplace(h2t);
    return affine(h2t, w3, b3);
  }

  std::vector<Tensor*> params() { return {&w1, &b1, &w2, &b2, &w3, &b3}; }
  std::vector<const Tensor*> params() const { return {&w1, &b1, &w2, &b2, &w3, &b3}; }

 private:
  static Tensor affine(const Tensor& X, const Tensor& W, const Tensor& b) {
    const std::size_t n = X.rows(), p = X.cols(), q = W.cols();
    Tensor out = Tensor::zeros({n, q});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t kk = 0; kk < p; ++kk) {
        const double a = X.at(i, kk);
        if (a == 0.0) continue;
        for (std::size_t j = 0; j < q; ++j) out.at(i, j) += a * W.at(kk, j);
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < q; ++j) out.at(i, j) += b.at(0, j);
    return out;
  }

  static void tanh_inplace(Tensor& t) {
    for (double& v : t.data()) v = std::tanh(v);
  }
};

/// Per column keep the alpha entries of largest |w|; ties at the boundary keep
/// the lower feature index. Returns the 0/1 mask.
inline Tensor topk_mask(const Tensor& W, std::size_t alpha) {
  const std::size_t m = W.rows(), k = W.cols();
  if (alpha < 1 || alpha > m) throw contract_error("sparsify_topk: alpha out of range");
  Tensor mask = Tensor::zeros({m, k});
  std::vector<std::size_t> order(m);
  for (std::size_t r = 0; r < k; ++r) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return std::abs(W.at(a, r)) > std::abs(W.at(b, r));
    });
    for (std::size_t t = 0; t < alpha; ++t) mask.at(order[t], r) = 1.0;
  }
  return mask;
}

inline Tensor sparsify_topk(const Tensor& W, std::size_t alpha) {
  Tensor mask = topk_mask(W, alpha);
  Tensor out = W;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return out;
}

/// Mask for a batch of flattened transformations (n×(m·k), entry (j,r) at
/// column j·k + r).
inline Tensor batch_topk_mask(const Tensor& w_flat, std::size_t m, std::size_t k,
                              std::size_t alpha) {
  Tensor mask = Tensor::zeros(w_flat.shape());
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < w_flat.rows(); ++i) {
    for (std::size_t r = 0; r < k; ++r) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(w_flat.at(i, a * k + r)) > std::abs(w_flat.at(i, b * k + r));
      });
      for (std::size_t t = 0; t < alpha; ++t) mask.at(i, order[t] * k + r) = 1.0;
    }
  }
  return mask;
}

/// z_r = Σ_j Wsp[j,r]·x[j].
inline std::vector<double> apply_transform(const Tensor& w_sparse,
                                           std::span<const double> x) {
  const std::size_t m = w_sparse.rows(), k = w_sparse.cols();
  if (x.size() != m) throw dimension_error("apply_transform: input length != m");
  std::vector<double> z(k, 0.0);
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t j = 0; j < m; ++j) z[r] += w_sparse.at(j, r) * x[j];
  return z;
}

inline Tensor sparse_transform(const MetaEncoderModel& model, std::span<const double> x,
                               std::size_t alpha) {
  return sparsify_topk(model.forward_transform(x), alpha);
}

inline std::vector<double> encode(const MetaEncoderModel& model, std::span<const double> x,
                                  std::size_t alpha) {
  return apply_transform(sparse_transform(model, x, alpha), x);
}

/// Numeric snapshot of one mini-batch: inputs, black-box probability rows,
/// per-instance sparsified transforms and latents.
struct EncodedBatch {
  Tensor X;                // n_b×m
  Tensor Y;                // n_b×c
  std::vector<Tensor> W;   // n_b sparsified m×k matrices
  Tensor Z;                // n_b×k
};

inline EncodedBatch encode_batch(const MetaEncoderModel& model, const Tensor& X,
                                 const Tensor& Y, std::size_t alpha) {
  EncodedBatch b;
  b.X = X;
  b.Y = Y;
  Tensor flat = model.forward_batch(X);
  const std::size_t n = X.rows();
  b.W.reserve(n);
  b.Z = Tensor::zeros({n, model.k});
  for (std::size_t i = 0; i < n; ++i) {
    Tensor wi({model.m, model.k}, flat.row_values(i));
    wi = sparsify_topk(wi, alpha);
    auto z = apply_transform(wi, X.row_values(i));
    for (std::size_t r = 0; r < model.k; ++r) b.Z.at(i, r) = z[r];
    b.W.push_back(std::move(wi));
  }
  return b;
}

// ---------------------------------------------------------------------------
// Numeric loss components (straight-line definitions; the graph builders below
// are the trained path and must agree with these).
// ---------------------------------------------------------------------------

/// (L_x^kl, L_y^kl) over a mini-batch.
inline std::pair<double, double> loss_kl(const EncodedBatch& batch,
                                         const geometry::FeatureSchema& schema) {
  const std::size_t n = batch.X.rows();
  if (n < 2) throw contract_error("loss_kl: batch size < 2");
  using geometry::pairwise_matrix;
  Tensor dX = pairwise_matrix(n, [&](std::size_t i, std::size_t j) {
    return geometry::input_distance(batch.X.row_values(i), batch.X.row_values(j), schema);
  });
  Tensor dY = pairwise_matrix(n, [&](std::size_t i, std::size_t j) {
    return geometry::cosine_distance(batch.Y.row_values(i), batch.Y.row_values(j));
  });
  Tensor dZ = pairwise_matrix(n, [&](std::size_t i, std::size_t j) {
    return geometry::cosine_distance(batch.Z.row_values(i), batch.Z.row_values(j));
  });
  Tensor dW = pairwise_matrix(n, [&](std::size_t i, std::size_t j) {
    return geometry::transform_distance(batch.W[i], batch.W[j]);
  });
  auto PX = geometry::neighbor_distribution(dX).rows;
  auto PY = geometry::neighbor_distribution(dY).rows;
  auto PZ = geometry::neighbor_distribution(dZ).rows;
  auto PW = geometry::neighbor_distribution(dW).rows;
  double lx = 0.0, ly = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lx += geometry::kl_row(PX.row_values(i), PZ.row_values(i));
    lx += geometry::kl_row(PZ.row_values(i), PW.row_values(i));
    ly += geometry::kl_row(PY.row_values(i), PZ.row_values(i));
  }
  return {lx / static_cast<double>(n), ly / static_cast<double>(n)};
}

/// (1/n_b) Σ_i ‖sp_α(W_i)ᵀ sp_α(W_i) − I_k‖²_F (k×k column Gram).
inline double loss_soft_orthogonality(const std::vector<Tensor>& w_batch, std::size_t alpha) {
  if (w_batch.empty()) throw contract_error("loss_soft_orthogonality: empty batch");
  double total = 0.0;
  for (const Tensor& wraw : w_batch) {
    Tensor w = sparsify_topk(wraw, alpha);
    const std::size_t m = w.rows(), k = w.cols();
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t s = 0; s < k; ++s) {
        double g = 0.0;
        for (std::size_t j = 0; j < m; ++j) g += w.at(j, r) * w.at(j, s);
        const double d = g - (r == s ? 1.0 : 0.0);
        total += d * d;
      }
  }
  return total / static_cast<double>(w_batch.size());
}

/// ‖C(Z) − I_k‖²_F with empirical Pearson correlations; stds floored at 1e-8.
inline double loss_collinearity(const Tensor& Z) {
  const std::size_t n = Z.rows(), k = Z.cols();
  if (n < 2) throw contract_error("loss_collinearity: batch size < 2");
  std::vector<double> mu(k, 0.0), sd(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < n; ++i) mu[r] += Z.at(i, r);
    mu[r] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = Z.at(i, r) - mu[r];
      sd[r] += d * d;
    }
    sd[r] = std::sqrt(sd[r] / static_cast<double>(n));
    if (sd[r] < tol::kStdClamp) sd[r] = tol::kStdClamp;
  }
  double total = 0.0;
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t s = 0; s < k; ++s) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        c += (Z.at(i, r) - mu[r]) / sd[r] * ((Z.at(i, s) - mu[s]) / sd[s]);
      c /= static_cast<double>(n);
      const double d = c - (r == s ? 1.0 : 0.0);
      total += d * d;
    }
  return total;
}

// ---------------------------------------------------------------------------
// Graph builders (the trained objective).
// ---------------------------------------------------------------------------

struct ParamLeaves {
  diff::NodePtr w1, b1, w2, b2, w3, b3;
  std::vector<diff::NodePtr> all;
};

inline ParamLeaves make_leaves(const MetaEncoderModel& md) {
  ParamLeaves p;
  p.w1 = diff::leaf(md.w1);
  p.b1 = diff::leaf(md.b1);
  p.w2 = diff::leaf(md.w2);
  p.b2 = diff::leaf(md.b2);
  p.w3 = diff::leaf(md.w3);
  p.b3 = diff::leaf(md.b3);
  p.all = {p.w1, p.b1, p.w2, p.b2, p.w3, p.b3};
  return p;
}

struct BatchGraph {
  diff::NodePtr X;                     // leaf (jacobian mode needs grads in it)
  diff::NodePtr w_flat;                // n_b×(m·k)
  diff::NodePtr w_sparse;              // masked
  std::vector<diff::NodePtr> w_cols;   // k column slices, each n_b×m
  std::vector<diff::NodePtr> z_cols;   // k latent columns, each n_b×1
  diff::NodePtr Z;                     // n_b×k
  Tensor mask;                         // straight-through top-α mask
};

inline diff::NodePtr forward_graph(const ParamLeaves& p, const diff::NodePtr& X) {
  using namespace diff;
  const std::size_t n = X->value.rows();
  NodePtr h1 = diff::tanh(add(matmul(X, p.w1), broadcast_rows(p.b1, n)));
  NodePtr h2 = diff::tanh(add(matmul(h1, p.w2), broadcast_rows(p.b2, n)));
  return add(matmul(h2, p.w3), broadcast_rows(p.b3, n));
}

inline BatchGraph build_batch_graph(const ParamLeaves& p, const Tensor& Xv, std::size_t m,
                                    std::size_t k, std::size_t alpha_eff) {
  using namespace diff;
  BatchGraph g;
  g.X = leaf(Xv);
  g.w_flat = forward_graph(p, g.X);
  if (alpha_eff < m) {
    g.mask = batch_topk_mask(g.w_flat->value, m, k, alpha_eff);
    g.w_sparse = mul(g.w_flat, constant(g.mask));
  } else {
    g.mask = Tensor::ones(g.w_flat->value.shape());
    g.w_sparse = g.w_flat;
  }
  for (std::size_t r = 0; r < k; ++r) {
    std::vector<std::size_t> idx(m);
    for (std::size_t j = 0; j < m; ++j) idx[j] = j * k + r;
    NodePtr wr = gather_cols(g.w_sparse, idx);
    g.w_cols.push_back(wr);
    g.z_cols.push_back(sum_cols(mul(wr, g.X)));
  }
  g.Z = concat_cols(g.z_cols);
  return g;
}

namespace detail {

/// Pairwise cosine-distance graph over the rows of M (n×p) -> n×n.
inline diff::NodePtr cosine_distance_graph(const diff::NodePtr& M) {
  using namespace diff;
  NodePtr sq = sum_cols(square(M));                       // n×1
  NodePtr norms = diff::sqrt(clamp_min(sq, tol::kNormClamp));
  NodePtr gram = matmul(M, transpose(M));                 // n×n
  NodePtr cross = matmul(norms, transpose(norms));        // n×n
  return one_minus(divide(gram, cross));
}

/// Neighbor-probability rows from a distance-node (diagonal masked to zero,
/// max-shifted exponentials; the shift is a constant and cancels exactly).
inline diff::NodePtr neighbor_graph(const diff::NodePtr& D) {
  using namespace diff;
  const std::size_t n = D->value.rows();
  NodePtr A = scale(square(D), -1.0);
  Tensor shift = Tensor::zeros({n, 1});
  for (std::size_t i = 0; i < n; ++i) {
    double best = -kInf;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) best = std::max(best, A->value.at(i, j));
    shift.at(i, 0) = best;
  }
  NodePtr E = diff::exp(sub(A, broadcast_cols(constant(shift), n)));
  Tensor offdiag = Tensor::ones({n, n});
  for (std::size_t i = 0; i < n; ++i) offdiag.at(i, i) = 0.0;
  NodePtr Em = mul(E, constant(offdiag));
  return divide(Em, broadcast_cols(sum_cols(Em), n));
}

/// Σ_{i,j} P log(P/Q) for a constant P against a graph Q.
inline diff::NodePtr kl_const_vs_graph(const Tensor& P, const diff::NodePtr& Q) {
  using namespace diff;
  Tensor plogp = P;
  for (double& v : plogp.data()) v = v > 0.0 ? v * std::log(v) : 0.0;
  NodePtr plogq = mul(constant(P), diff::log(clamp_min(Q, tol::kProbClamp)));
  return sum_all(sub(constant(plogp), plogq));
}

/// Σ_{i,j} P log(P/Q) with both graph-valued. P has an exactly-zero diagonal
/// whose gradient path is blocked by the construction mask.
inline diff::NodePtr kl_graph_vs_graph(const diff::NodePtr& P, const diff::NodePtr& Q) {
  using namespace diff;
  NodePtr logp = diff::log(clamp_min(P, tol::kProbClamp));
  NodePtr logq = diff::log(clamp_min(Q, tol::kProbClamp));
  return sum_all(mul(P, sub(logp, logq)));
}

}  // namespace detail

/// Stability penalty node for one batch; jacobian mode differentiates the
/// encode map w.r.t. the input leaf (the resulting nodes stay trainable),
/// perturbation mode is the sampled first-order estimate of the same quantity.
inline diff::NodePtr stability_node(const ParamLeaves& p, const BatchGraph& g,
                                    const TrainingConfig& cfg, std::size_t m, std::size_t k,
                                    std::size_t alpha_eff, std::uint64_t noise_seed) {
  using namespace diff;
  const std::size_t n = g.X->value.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  if (cfg.stability_mode == StabilityMode::kJacobian) {
    NodePtr acc = nullptr;
    for (std::size_t r = 0; r < k; ++r) {
      NodePtr jr = backward(sum_all(g.z_cols[r]), {g.X})[0];  // n×m, row i = ∂z_{i,r}/∂x_i
      NodePtr term = sum_all(square(sub(jr, g.w_cols[r])));
      acc = acc ? add(acc, term) : term;
    }
    return scale(acc, inv_n);
  }
  Rng rng(noise_seed);
  const std::size_t q = std::max<std::size_t>(cfg.perturb_dirs, 1);
  NodePtr acc = nullptr;
  for (std::size_t s = 0; s < q; ++s) {
    Tensor delta = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < n; ++i) {
      double norm = 0.0;
      std::vector<double> d(m);
      for (std::size_t j = 0; j < m; ++j) {
        d[j] = rng.normal();
        norm += d[j] * d[j];
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < m; ++j) delta.at(i, j) = d[j] / norm * cfg.perturb_norm;
    }
    Tensor xp = g.X->value;
    for (std::size_t i = 0; i < xp.size(); ++i) xp[i] += delta[i];
    NodePtr Xp = constant(xp);
    NodePtr flat_p = forward_graph(p, Xp);
    NodePtr sparse_p = flat_p;
    if (alpha_eff < m)
      sparse_p = mul(flat_p, constant(batch_topk_mask(flat_p->value, m, k, alpha_eff)));
    NodePtr dnode = constant(delta);
    for (std::size_t r = 0; r < k; ++r) {
      std::vector<std::size_t> idx(m);
      for (std::size_t j = 0; j < m; ++j) idx[j] = j * k + r;
      NodePtr wpr = gather_cols(sparse_p, idx);
      NodePtr zpr = sum_cols(mul(wpr, Xp));
      NodePtr lin = sum_cols(mul(g.w_cols[r], dnode));
      NodePtr dr = sub(sub(zpr, g.z_cols[r]), lin);
      NodePtr term = sum_all(square(dr));
      acc = acc ? add(acc, term) : term;
    }
  }
  // m/(q·‖δ‖²) makes this an unbiased estimate of mean ‖J−W‖²_F.
  const double f = static_cast<double>(m) /
                   (static_cast<double>(q) * cfg.perturb_norm * cfg.perturb_norm);
  return scale(acc, f * inv_n);
}

struct LossNodes {
  diff::NodePtr lx_kl, ly_kl, l_st, l_so, l_co, total;
};

/// Builds the full objective for one mini-batch. `noise_seed` fixes the
/// perturbation-mode directions so finite-difference checks see a frozen
/// objective.
inline LossNodes build_losses(const ParamLeaves& p, const BatchGraph& g, const Tensor& Yv,
                              const geometry::FeatureSchema& schema,
                              const TrainingConfig& cfg, std::size_t m, std::size_t k,
                              std::size_t alpha_eff, std::uint64_t noise_seed) {
  using namespace diff;
  const std::size_t n = g.X->value.rows();
  if (n < 2) throw contract_error("build_losses: batch size < 2");
  const double inv_n = 1.0 / static_cast<double>(n);

  // Constant-side distributions.
  Tensor dX = geometry::pairwise_matrix(n, [&](std::size_t i, std::size_t j) {
    return geometry::input_distance(g.X->value.row_values(i), g.X->value.row_values(j),
                                    schema);
  });
  Tensor dY = geometry::pairwise_matrix(n, [&](std::size_t i, std::size_t j) {
    return geometry::cosine_distance(Yv.row_values(i), Yv.row_values(j));
  });
  Tensor PX = geometry::neighbor_distribution(dX).rows;
  Tensor PY = geometry::neighbor_distribution(dY).rows;

  // Graph-side distributions.
  NodePtr SZ = detail::neighbor_graph(detail::cosine_distance_graph(g.Z));
  NodePtr dW = nullptr;
  for (std::size_t r = 0; r < k; ++r) {
    NodePtr dr = detail::cosine_distance_graph(g.w_cols[r]);
    dW = dW ? add(dW, dr) : dr;
  }
  NodePtr SW = detail::neighbor_graph(scale(dW, 1.0 / static_cast<double>(k)));

  LossNodes out;
  out.lx_kl = scale(add(detail::kl_const_vs_graph(PX, SZ),
                        detail::kl_graph_vs_graph(SZ, SW)),
                    inv_n);
  out.ly_kl = scale(detail::kl_const_vs_graph(PY, SZ), inv_n);

  // Soft orthogonality on column Grams.
  {
    NodePtr acc = nullptr;
    for (std::size_t r = 0; r < k; ++r)
      for (std::size_t s = r; s < k; ++s) {
        NodePtr grs = sum_cols(mul(g.w_cols[r], g.w_cols[s]));  // n×1
        if (r == s) grs = add_const(grs, -1.0);
        NodePtr term = sum_all(square(grs));
        if (r != s) term = scale(term, 2.0);
        acc = acc ? add(acc, term) : term;
      }
    out.l_so = scale(acc, inv_n);
  }

  // Non-collinearity on the latent correlation matrix.
  {
    NodePtr mu = scale(sum_rows(g.Z), inv_n);                       // 1×k
    NodePtr zc = sub(g.Z, broadcast_rows(mu, n));
    NodePtr var = scale(sum_rows(square(zc)), inv_n);               // 1×k
    NodePtr sd = diff::sqrt(clamp_min(var, tol::kStdClamp * tol::kStdClamp));
    NodePtr zs = divide(zc, broadcast_rows(sd, n));
    NodePtr corr = scale(matmul(transpose(zs), zs), inv_n);         // k×k
    out.l_co = sum_all(square(sub(corr, constant(Tensor::identity(k)))));
  }

  out.l_st = stability_node(p, g, cfg, m, k, alpha_eff, noise_seed);

  NodePtr total = out.lx_kl;
  if (cfg.lambda_y != 0.0) total = add(total, scale(out.ly_kl, cfg.lambda_y));
  if (cfg.lambda_st != 0.0) total = add(total, scale(out.l_st, cfg.lambda_st));
  if (cfg.lambda_so != 0.0) total = add(total, scale(out.l_so, cfg.lambda_so));
  if (cfg.lambda_co != 0.0) total = add(total, scale(out.l_co, cfg.lambda_co));
  out.total = total;
  return out;
}

/// Stability penalty value for a batch (both modes share the graph builder).
inline double loss_stability(const MetaEncoderModel& md, const Tensor& X, StabilityMode mode,
                             std::size_t alpha, std::uint64_t noise_seed = 1,
                             std::size_t perturb_dirs = 64, double perturb_norm = 1e-3) {
  TrainingConfig cfg;
  cfg.stability_mode = mode;
  cfg.perturb_dirs = perturb_dirs;
  cfg.perturb_norm = perturb_norm;
  ParamLeaves p = make_leaves(md);
  BatchGraph g = build_batch_graph(p, X, md.m, md.k, alpha);
  return stability_node(p, g, cfg, md.m, md.k, alpha, noise_seed)->value[0];
}

/// Scalar objective node for one batch; exposed for gradient checks.
inline diff::NodePtr total_loss(const ParamLeaves& p, const Tensor& Xv, const Tensor& Yv,
                                const geometry::FeatureSchema& schema,
                                const TrainingConfig& cfg, std::size_t m, std::size_t k,
                                std::size_t alpha_eff, std::uint64_t noise_seed = 1) {
  BatchGraph g = build_batch_graph(p, Xv, m, k, alpha_eff);
  return build_losses(p, g, Yv, schema, cfg, m, k, alpha_eff, noise_seed).total;
}

// ---------------------------------------------------------------------------
// Training loop: pretrain dense, ramp sparsity linearly, finetune with early
// stopping on a held-out validation slice.
// ---------------------------------------------------------------------------

struct TrainReport {
  std::vector<double> epoch_train_loss;  // running mean of mini-batch losses
  std::vector<double> epoch_eval_loss;   // post-epoch loss on the training split
  std::vector<double> epoch_val_loss;
  std::size_t epochs_run = 0;
  double best_val_loss = kInf;
};

inline std::size_t effective_alpha(std::size_t epoch, std::size_t m, std::size_t alpha,
                                   const TrainingConfig& cfg) {
  if (alpha >= m) return m;
  if (epoch < cfg.pretrain_epochs) return m;
  if (epoch < cfg.pretrain_epochs + cfg.ramp_epochs) {
    const double t = static_cast<double>(epoch - cfg.pretrain_epochs + 1) /
                     static_cast<double>(cfg.ramp_epochs);
    const double a = static_cast<double>(m) +
                     (static_cast<double>(alpha) - static_cast<double>(m)) * t;
    auto r = static_cast<std::size_t>(std::llround(a));
    return std::clamp<std::size_t>(r, alpha, m);
  }
  return alpha;
}

inline MetaEncoderModel train(const Tensor& X, const Tensor& Y, std::size_t k,
                              std::size_t alpha, const TrainingConfig& cfg,
                              const geometry::FeatureSchema& schema,
                              TrainReport* report = nullptr) {
  const std::size_t n = X.rows(), m = X.cols();
  if (n == 0) throw contract_error("train: empty dataset");
  if (Y.rows() != n) throw contract_error("train: outputs misaligned with dataset");
  if (n < 2 * cfg.batch_size) throw contract_error("train: need at least 2 batches of rows");
  if (alpha < 1 || alpha > m) throw contract_error("train: alpha out of range");

  MetaEncoderModel md = MetaEncoderModel::init(m, k, alpha, cfg.seed);

  Rng rng(cfg.seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.validation_fraction * static_cast<double>(n)));
  if (n_val == 1) n_val = 2;  // a KL batch needs two rows
  if (n - n_val < 2 * cfg.batch_size) n_val = 0;
  std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + n_val);
  std::vector<std::size_t> train_idx(idx.begin() + n_val, idx.end());

  auto slice = [&](const Tensor& src, const std::vector<std::size_t>& rows) {
    Tensor out = Tensor::zeros({rows.size(), src.cols()});
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t j = 0; j < src.cols(); ++j) out.at(i, j) = src.at(rows[i], j);
    return out;
  };

  std::vector<diff::AdamState> adam(6);
  const std::size_t total_epochs =
      std::min(cfg.max_epochs, cfg.pretrain_epochs + cfg.ramp_epochs + cfg.finetune_epochs);

  MetaEncoderModel best = md;
  double best_val = kInf;
  std::size_t bad_epochs = 0;

  auto eval_loss = [&](const std::vector<std::size_t>& rows, std::size_t alpha_eff,
                       std::uint64_t salt) {
    // Fixed-order batches; returns the row-weighted mean batch loss.
    double acc = 0.0;
    std::size_t used = 0;
    for (std::size_t start = 0; start + 2 <= rows.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, rows.size() - start);
      if (len < 2) break;
      std::vector<std::size_t> b(rows.begin() + start, rows.begin() + start + len);
      ParamLeaves p = make_leaves(md);
      auto node = total_loss(p, slice(X, b), slice(Y, b), schema, cfg, m, k, alpha_eff,
                             cfg.seed ^ (salt * 0x9E37ULL + start));
      acc += node->value[0] * static_cast<double>(len);
      used += len;
    }
    return used ? acc / static_cast<double>(used) : kInf;
  };

  for (std::size_t epoch = 0; epoch < total_epochs; ++epoch) {
    const std::size_t alpha_eff = effective_alpha(epoch, m, alpha, cfg);
    Rng erng = rng.fork(epoch + 1);
    std::vector<std::size_t> order = train_idx;
    erng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    const std::size_t n_batches = order.size() / cfg.batch_size;
    for (std::size_t bi = 0; bi < n_batches; ++bi) {
      std::vector<std::size_t> b(order.begin() + bi * cfg.batch_size,
                                 order.begin() + (bi + 1) * cfg.batch_size);
      ParamLeaves p = make_leaves(md);
      auto loss = total_loss(p, slice(X, b), slice(Y, b), schema, cfg, m, k, alpha_eff,
                             cfg.seed ^ (epoch * 1315423911ULL + bi));
      auto grads = diff::backward(loss, p.all);
      auto params = md.params();
      for (std::size_t pi = 0; pi < params.size(); ++pi)
        diff::adam_step(*params[pi], grads[pi]->value, adam[pi], cfg.learning_rate);
      epoch_loss += loss->value[0] * static_cast<double>(b.size());
      seen += b.size();
    }
    epoch_loss = seen ? epoch_loss / static_cast<double>(seen) : kInf;

    double val_loss = kInf;
    const bool finetune = epoch >= cfg.pretrain_epochs + cfg.ramp_epochs || alpha >= m;
    if (n_val >= 2) val_loss = eval_loss(val_idx, alpha_eff, epoch + 7777);
    if (report) {
      report->epoch_train_loss.push_back(epoch_loss);
      if (cfg.record_train_curve)
        report->epoch_eval_loss.push_back(eval_loss(train_idx, alpha_eff, 555));
      report->epoch_val_loss.push_back(val_loss);
      report->epochs_run = epoch + 1;
    }
    if (finetune && n_val >= 2) {
      if (val_loss < best_val) {
        best_val = val_loss;
        best = md;
        bad_epochs = 0;
      } else if (++bad_epochs >= cfg.early_stopping_patience) {
        break;
      }
    }
  }
  if (report) report->best_val_loss = best_val;
  return (n_val >= 2 && best_val < kInf) ? best : md;
}

}  // namespace illume::metaenc

#endif  // ILLUME_METAENC_HPP
