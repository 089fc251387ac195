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
#ifndef ILLUME_EXPLAIN_HPP
#define ILLUME_EXPLAIN_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "illume/common.hpp"
#include "illume/geometry.hpp"
#include "illume/metaenc.hpp"
#include "illume/surrogate.hpp"
#include "illume/tensor.hpp"

namespace illume::explain {

// ---------------------------------------------------------------------------
// Explanation shapes
// ---------------------------------------------------------------------------

struct FeatureImportance {
  std::vector<double> psi;
  int target_class = 1;
  bool valid = true;
  std::optional<std::pair<double, double>> refinement;  // (gamma_w, gamma_x)
};

/// Axis-parallel box in input space, closed on both sides; ±inf marks an
/// unconstrained bound.
struct AxisRule {
  std::vector<double> lower;
  std::vector<double> upper;
  int label = 0;

  bool contains(std::span<const double> x) const {
    for (std::size_t j = 0; j < lower.size(); ++j)
      if (!(x[j] >= lower[j] && x[j] <= upper[j])) return false;
    return true;
  }
};

/// Latent intervals attached to the transformation's columns; x satisfies the
/// rule iff its encoding under the same W satisfies the latent intervals.
struct ObliqueRule {
  Tensor w;  // m×k
  std::vector<double> lower;
  std::vector<double> upper;
  int label = 0;

  bool contains(std::span<const double> x) const {
    auto z = metaenc::apply_transform(w, x);
    for (std::size_t r = 0; r < lower.size(); ++r)
      if (!(z[r] > lower[r] && z[r] <= upper[r])) return false;
    return true;
  }
};

struct RefinementResult {
  double gamma_w = 1.0;
  double gamma_x = 1.0;
  Tensor w_star;                 // interpolated transformation (alpha-sparse)
  std::vector<double> eps_star;  // latent offset: z_star - w_starᵀx
  std::vector<double> z_star;
  std::size_t neighbor_index = 0;
};

struct CounterfactualExplanation {
  AxisRule rule;                    // input-space rule of the opposite class
  std::vector<double> example_row;  // counter-example from the training set
  std::size_t n_changes = 0;        // differing latent split conditions
  std::size_t source_index = 0;
};

/// Frozen training-side state the generator searches over.
struct LatentStore {
  Tensor X;               // n×m preprocessed training rows
  Tensor Z;               // n×k latents
  std::vector<Tensor> W;  // sparsified per-row transforms
  std::vector<int> bb_labels;
  std::vector<char> agree;  // surrogate prediction matched the black box

  std::size_t size() const { return Z.rows(); }
};

using PredictFn = std::function<int(std::span<const double>)>;

inline LatentStore build_latent_store(const metaenc::MetaEncoderModel& enc,
                                      std::size_t alpha, const Tensor& X,
                                      const std::vector<int>& bb_labels,
                                      const PredictFn& predict) {
  LatentStore store;
  store.X = X;
  store.bb_labels = bb_labels;
  const std::size_t n = X.rows();
  Tensor flat = enc.forward_batch(X);
  store.Z = Tensor::zeros({n, enc.k});
  store.W.reserve(n);
  store.agree.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor wi({enc.m, enc.k}, flat.row_values(i));
    wi = metaenc::sparsify_topk(wi, alpha);
    auto z = metaenc::apply_transform(wi, X.row_values(i));
    for (std::size_t r = 0; r < enc.k; ++r) store.Z.at(i, r) = z[r];
    store.agree[i] = predict(z) == bb_labels[i] ? 1 : 0;
    store.W.push_back(std::move(wi));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Importance pullback
// ---------------------------------------------------------------------------

/// ψ_j = Σ_r β_r W_{j,r}.
inline std::vector<double> importance_pullback(const Tensor& w,
                                               std::span<const double> beta) {
  if (beta.size() != w.cols()) throw dimension_error("importance_pullback: beta length");
  std::vector<double> psi(w.rows(), 0.0);
  for (std::size_t j = 0; j < w.rows(); ++j)
    for (std::size_t r = 0; r < w.cols(); ++r) psi[j] += beta[r] * w.at(j, r);
  return psi;
}

// ---------------------------------------------------------------------------
// Rule conversion
// ---------------------------------------------------------------------------

inline ObliqueRule latent_to_oblique(const surrogate::LatentRule& rule, const Tensor& w) {
  if (rule.lower.size() != w.cols()) throw dimension_error("latent_to_oblique: rank mismatch");
  ObliqueRule o;
  o.w = w;
  o.lower = rule.lower;
  o.upper = rule.upper;
  o.label = rule.label;
  return o;
}

/// Tighten per-feature offsets out of the k oblique conditions. Division by a
/// negative weight flips which latent bound feeds which side, so the instance
/// always stays inside its own rule.
inline AxisRule oblique_to_axis(const surrogate::LatentRule& rule, const Tensor& w,
                                std::span<const double> x, std::span<const double> z,
                                int label) {
  const std::size_t m = w.rows(), k = w.cols();
  if (x.size() != m || z.size() != k) throw dimension_error("oblique_to_axis: shape mismatch");
  for (std::size_t r = 0; r < k; ++r)
    if (!(z[r] >= rule.lower[r] && z[r] <= rule.upper[r]))
      throw contract_error("oblique_to_axis: latent point violates the rule");
  AxisRule out;
  out.lower.assign(m, -kInf);
  out.upper.assign(m, kInf);
  out.label = label;
  for (std::size_t j = 0; j < m; ++j) {
    double lo = -kInf, hi = kInf;  // offsets relative to x_j
    bool any = false;
    for (std::size_t r = 0; r < k; ++r) {
      const double wjr = w.at(j, r);
      if (wjr == 0.0) continue;
      if (std::isfinite(rule.lower[r])) {
        const double c = (rule.lower[r] - z[r]) / wjr;
        if (wjr > 0.0)
          lo = std::max(lo, c);
        else
          hi = std::min(hi, c);
        any = true;
      }
      if (std::isfinite(rule.upper[r])) {
        const double c = (rule.upper[r] - z[r]) / wjr;
        if (wjr > 0.0)
          hi = std::min(hi, c);
        else
          lo = std::max(lo, c);
        any = true;
      }
    }
    if (!any) continue;
    if (std::isfinite(lo)) out.lower[j] = x[j] + lo;
    if (std::isfinite(hi)) out.upper[j] = x[j] + hi;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fidelity refinement (latent interpolation toward the closest valid neighbor)
// ---------------------------------------------------------------------------

inline RefinementResult refine_fidelity(std::span<const double> x, std::span<const double> z,
                                        const Tensor& w, const PredictFn& predict,
                                        int b_label, const LatentStore& store,
                                        std::size_t alpha, std::size_t grid = 20) {
  const std::size_t k = z.size();

  // Closest valid neighbor: surrogate-correct rows sharing the black-box label.
  std::size_t nn = store.size();
  double best_d = kInf;
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (!store.agree[i] || store.bb_labels[i] != b_label) continue;
    const double d = geometry::cosine_distance(z, store.Z.row_values(i));
    if (d < best_d) {
      best_d = d;
      nn = i;
    }
  }
  if (nn == store.size())
    throw no_valid_neighbor_error("refine_fidelity: no surrogate-correct neighbor with the target label");

  const Tensor& w_nn = store.W[nn];
  auto z_nn = store.Z.row_values(nn);
  auto wnn_x = metaenc::apply_transform(w_nn, x);
  std::vector<double> dx(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) dx[j] = store.X.at(nn, j) - x[j];
  auto wnn_dx = metaenc::apply_transform(w_nn, dx);

  double best_dist = kInf, best_sum = kInf;
  double best_gw = 1.0, best_gx = 1.0;
  std::vector<double> best_z;
  bool found = false;
  std::vector<double> zg(k);
  for (std::size_t iw = 1; iw <= grid; ++iw) {
    const double gw = static_cast<double>(iw) / static_cast<double>(grid);
    for (std::size_t ix = 1; ix <= grid; ++ix) {
      const double gx = static_cast<double>(ix) / static_cast<double>(grid);
      if (iw == grid && ix == grid) {
        zg.assign(z_nn.begin(), z_nn.end());  // the corner is the neighbor itself
      } else {
        for (std::size_t r = 0; r < k; ++r)
          zg[r] = (1.0 - gw) * z[r] + gw * wnn_x[r] + gx * wnn_dx[r];
      }
      if (predict(zg) != b_label) continue;
      double dist = 0.0;
      for (std::size_t r = 0; r < k; ++r) dist += (zg[r] - z[r]) * (zg[r] - z[r]);
      const double gsum = gw + gx;
      if (dist < best_dist || (dist == best_dist && gsum < best_sum)) {
        best_dist = dist;
        best_sum = gsum;
        best_gw = gw;
        best_gx = gx;
        best_z = zg;
        found = true;
      }
    }
  }
  if (!found)
    throw no_valid_neighbor_error("refine_fidelity: no feasible grid cell");  // unreachable: the corner is feasible

  RefinementResult res;
  res.gamma_w = best_gw;
  res.gamma_x = best_gx;
  res.neighbor_index = nn;
  res.z_star = std::move(best_z);
  Tensor w_star = w;
  for (std::size_t i = 0; i < w_star.size(); ++i)
    w_star[i] += best_gw * (w_nn[i] - w_star[i]);
  if (alpha < w_star.rows()) w_star = metaenc::sparsify_topk(w_star, alpha);
  res.w_star = std::move(w_star);
  // Absorb whatever the interpolation (and sparsification) did not explain
  // into the latent offset, so z_star == w_starᵀx + eps_star holds exactly.
  auto wx = metaenc::apply_transform(res.w_star, x);
  res.eps_star.resize(k);
  for (std::size_t r = 0; r < k; ++r) res.eps_star[r] = res.z_star[r] - wx[r];
  return res;
}

inline FeatureImportance refined_importance(const RefinementResult& ref,
                                            std::span<const double> beta, int target_class) {
  FeatureImportance fi;
  fi.psi = importance_pullback(ref.w_star, beta);
  fi.target_class = target_class;
  fi.valid = true;
  fi.refinement = std::make_pair(ref.gamma_w, ref.gamma_x);
  return fi;
}

/// Axis rule for a refined instance: the latent rule of z*'s leaf, bounds
/// translated by the offset, converted with the interpolated transformation.
inline AxisRule refined_rule(const RefinementResult& ref, const surrogate::LatentRule& rule,
                             std::span<const double> x) {
  surrogate::LatentRule shifted = rule;
  const std::size_t k = rule.lower.size();
  std::vector<double> z_tilde(k);
  for (std::size_t r = 0; r < k; ++r) {
    if (std::isfinite(shifted.lower[r])) shifted.lower[r] -= ref.eps_star[r];
    if (std::isfinite(shifted.upper[r])) shifted.upper[r] -= ref.eps_star[r];
    z_tilde[r] = ref.z_star[r] - ref.eps_star[r];
  }
  return oblique_to_axis(shifted, ref.w_star, x, z_tilde, rule.label);
}

// ---------------------------------------------------------------------------
// Counterfactual rules
// ---------------------------------------------------------------------------

inline std::size_t count_rule_changes(const surrogate::LatentRule& a,
                                      const surrogate::LatentRule& b) {
  std::size_t changes = 0;
  for (std::size_t r = 0; r < a.lower.size(); ++r)
    if (a.lower[r] != b.lower[r] || a.upper[r] != b.upper[r]) ++changes;
  return changes;
}

/// Pick, among training instances the surrogate tree sends to a different
/// class, the latent leaf rule needing the fewest split-condition changes
/// (latent cosine similarity breaks ties), and convert it through the source
/// instance's own transformation.
inline CounterfactualExplanation counterfactual(std::span<const double> z_ref,
                                                const surrogate::LatentRule& rule_ref,
                                                int label_ref,
                                                const surrogate::TreeSurrogate& tree,
                                                const LatentStore& store) {
  std::size_t best = store.size();
  std::size_t best_changes = 0;
  double best_sim = -kInf;
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto zi = store.Z.row_values(i);
    if (tree.predict(zi) == label_ref) continue;
    auto rule_i = surrogate::extract_latent_rule(tree, zi);
    const std::size_t changes = count_rule_changes(rule_ref, rule_i);
    const double sim = 1.0 - geometry::cosine_distance(z_ref, zi);
    if (best == store.size() || changes < best_changes ||
        (changes == best_changes && sim > best_sim)) {
      best = i;
      best_changes = changes;
      best_sim = sim;
    }
  }
  if (best == store.size())
    throw no_valid_neighbor_error("counterfactual: no training instance with a different prediction");

  auto z_src = store.Z.row_values(best);
  auto rule_src = surrogate::extract_latent_rule(tree, z_src);
  CounterfactualExplanation cf;
  cf.rule = oblique_to_axis(rule_src, store.W[best], store.X.row_values(best), z_src,
                            rule_src.label);
  cf.example_row = store.X.row_values(best);
  cf.n_changes = best_changes;
  cf.source_index = best;
  return cf;
}

// ---------------------------------------------------------------------------
// The explanation generator
// ---------------------------------------------------------------------------

enum class SurrogateKind { kLogistic, kTree };
enum class ExplanationKind { kImportance, kRule, kCounterfactual };

/// Everything the generator needs once training is done.
struct ExplainContext {
  metaenc::MetaEncoderModel encoder;
  std::size_t alpha = 0;
  SurrogateKind surrogate_kind = SurrogateKind::kLogistic;
  surrogate::LogisticSurrogate logistic;
  surrogate::TreeSurrogate tree;
  LatentStore store;
  int target_class = 1;
  std::size_t refine_grid = 20;

  int predict_label(std::span<const double> z) const {
    if (surrogate_kind == SurrogateKind::kLogistic)
      return static_cast<int>(surrogate::argmax_label(surrogate::predict_logistic(logistic, z)));
    return tree.predict(z);
  }

  PredictFn predictor() const {
    return [this](std::span<const double> z) { return predict_label(z); };
  }
};

struct Explanation {
  std::size_t instance_id = 0;
  ExplanationKind kind = ExplanationKind::kImportance;
  int label = 0;  // black-box label being explained
  bool valid = false;
  std::optional<std::pair<double, double>> refinement;
  std::vector<double> psi;                              // importance
  std::optional<AxisRule> rule;                         // rule
  std::optional<CounterfactualExplanation> counterfactual;
  std::string error;
};

inline Explanation explain_instance(const ExplainContext& ctx, std::span<const double> x,
                                    std::span<const double> bb_probs, ExplanationKind kind,
                                    std::size_t instance_id = 0) {
  Explanation out;
  out.instance_id = instance_id;
  out.kind = kind;
  const int b_label = static_cast<int>(surrogate::argmax_label(bb_probs));
  out.label = b_label;

  Tensor w = metaenc::sparse_transform(ctx.encoder, x, ctx.alpha);
  std::vector<double> z = metaenc::apply_transform(w, x);
  std::optional<RefinementResult> ref;
  out.valid = ctx.predict_label(z) == b_label;
  if (!out.valid) {
    try {
      ref = refine_fidelity(x, z, w, ctx.predictor(), b_label, ctx.store, ctx.alpha,
                            ctx.refine_grid);
      out.valid = true;
      out.refinement = std::make_pair(ref->gamma_w, ref->gamma_x);
    } catch (const no_valid_neighbor_error& e) {
      out.error = e.what();
    }
  }
  const Tensor& w_use = ref ? ref->w_star : w;
  const std::vector<double>& z_use = ref ? ref->z_star : z;

  switch (kind) {
    case ExplanationKind::kImportance: {
      if (ctx.surrogate_kind != SurrogateKind::kLogistic)
        throw contract_error("explain: importance requires the logistic surrogate");
      out.psi = importance_pullback(w_use, ctx.logistic.beta(static_cast<std::size_t>(ctx.target_class)));
      break;
    }
    case ExplanationKind::kRule: {
      if (ctx.surrogate_kind != SurrogateKind::kTree)
        throw contract_error("explain: rules require the tree surrogate");
      auto latent = surrogate::extract_latent_rule(ctx.tree, z_use);
      out.rule = ref ? refined_rule(*ref, latent, x)
                     : oblique_to_axis(latent, w, x, z, latent.label);
      break;
    }
    case ExplanationKind::kCounterfactual: {
      if (ctx.surrogate_kind != SurrogateKind::kTree)
        throw contract_error("explain: counterfactuals require the tree surrogate");
      auto latent = surrogate::extract_latent_rule(ctx.tree, z_use);
      out.counterfactual =
          counterfactual(z_use, latent, latent.label, ctx.tree, ctx.store);
      break;
    }
  }
  return out;
}

}  // namespace illume::explain

#endif  // ILLUME_EXPLAIN_HPP
