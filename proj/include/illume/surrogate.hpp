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
#ifndef ILLUME_SURROGATE_HPP
#define ILLUME_SURROGATE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "illume/common.hpp"
#include "illume/tensor.hpp"

namespace illume::surrogate {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline std::size_t argmax_label(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < probs.size(); ++c)
    if (probs[c] > probs[best]) best = c;
  return best;
}

// ---------------------------------------------------------------------------
// Logistic surrogate
// ---------------------------------------------------------------------------

/// Binary logistic model; c > 2 is handled one-vs-rest with softmax-normalized
/// scores. The L2 penalty excludes the intercept.
struct LogisticSurrogate {
  std::size_t k = 0;
  std::size_t classes = 2;
  std::vector<double> intercepts;          // one per OvR model (1 for binary)
  std::vector<std::vector<double>> coefs;  // one β per OvR model

  /// β for pulling importances back; class_id is ignored in the binary case
  /// (the single model scores class 1).
  const std::vector<double>& beta(std::size_t class_id) const {
    return classes == 2 ? coefs[0] : coefs.at(class_id);
  }
  double beta0(std::size_t class_id) const {
    return classes == 2 ? intercepts[0] : intercepts.at(class_id);
  }
};

namespace detail {

/// Full-batch gradient descent with backtracking on the L2-penalized mean
/// negative log-likelihood. Small, deterministic, no dependencies.
inline void fit_binary_logistic(const Tensor& Z, const std::vector<int>& y01, double l2,
                                std::size_t max_iter, double& b0, std::vector<double>& beta,
                                double grad_tol = 1e-6) {
  const std::size_t n = Z.rows(), k = Z.cols();
  b0 = 0.0;
  beta.assign(k, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](double bb0, const std::vector<double>& bb) {
    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double t = bb0;
      for (std::size_t j = 0; j < k; ++j) t += bb[j] * Z.at(i, j);
      // Stable log(1+exp): -y·t + log(1+e^t)
      const double lse = t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      nll += lse - (y01[i] ? t : 0.0);
    }
    nll *= inv_n;
    double pen = 0.0;
    for (double b : bb) pen += b * b;
    return nll + l2 * pen;
  };

  double step = 1.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    double g0 = 0.0;
    std::vector<double> g(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double t = b0;
      for (std::size_t j = 0; j < k; ++j) t += beta[j] * Z.at(i, j);
      const double r = sigmoid(t) - static_cast<double>(y01[i]);
      g0 += r;
      for (std::size_t j = 0; j < k; ++j) g[j] += r * Z.at(i, j);
    }
    g0 *= inv_n;
    double ginf = std::abs(g0);
    for (std::size_t j = 0; j < k; ++j) {
      g[j] = g[j] * inv_n + 2.0 * l2 * beta[j];
      ginf = std::max(ginf, std::abs(g[j]));
    }
    if (ginf < grad_tol) break;

    const double f = objective(b0, beta);
    double gnorm2 = g0 * g0;
    for (double v : g) gnorm2 += v * v;
    step = std::min(step * 2.0, 64.0);  // allow recovery after shrinks
    while (step > 1e-12) {
      double nb0 = b0 - step * g0;
      std::vector<double> nb(k);
      for (std::size_t j = 0; j < k; ++j) nb[j] = beta[j] - step * g[j];
      if (objective(nb0, nb) <= f - 0.25 * step * gnorm2) {
        b0 = nb0;
        beta = std::move(nb);
        break;
      }
      step *= 0.5;
    }
    if (step <= 1e-12) break;
  }
}

}  // namespace detail

inline LogisticSurrogate fit_logistic(const Tensor& Z, const std::vector<int>& labels,
                                      double l2 = 1e-3, std::size_t max_iter = 2000) {
  const std::size_t n = Z.rows();
  if (n < 2) throw contract_error("fit_logistic: need at least two rows");
  if (labels.size() != n) throw contract_error("fit_logistic: labels misaligned");
  int max_label = 0;
  for (int c : labels) max_label = std::max(max_label, c);
  const std::size_t classes = static_cast<std::size_t>(max_label) + 1;
  std::vector<std::size_t> counts(classes, 0);
  for (int c : labels) counts[static_cast<std::size_t>(c)]++;
  std::size_t present = 0;
  for (std::size_t c : counts) present += c > 0 ? 1 : 0;
  if (present < 2) throw contract_error("fit_logistic: single-class labels");

  LogisticSurrogate s;
  s.k = Z.cols();
  s.classes = std::max<std::size_t>(classes, 2);
  const std::size_t models = s.classes == 2 ? 1 : s.classes;
  s.intercepts.resize(models);
  s.coefs.resize(models);
  for (std::size_t cm = 0; cm < models; ++cm) {
    std::vector<int> y01(n);
    const int target = s.classes == 2 ? 1 : static_cast<int>(cm);
    for (std::size_t i = 0; i < n; ++i) y01[i] = labels[i] == target ? 1 : 0;
    detail::fit_binary_logistic(Z, y01, l2, max_iter, s.intercepts[cm], s.coefs[cm]);
  }
  return s;
}

inline std::vector<double> predict_logistic(const LogisticSurrogate& s,
                                            std::span<const double> z) {
  if (z.size() != s.k) throw dimension_error("predict_logistic: latent length mismatch");
  if (s.classes == 2) {
    double t = s.intercepts[0];
    for (std::size_t j = 0; j < s.k; ++j) t += s.coefs[0][j] * z[j];
    const double p1 = sigmoid(t);
    return {1.0 - p1, p1};
  }
  std::vector<double> scores(s.classes);
  double mx = -kInf;
  for (std::size_t c = 0; c < s.classes; ++c) {
    double t = s.intercepts[c];
    for (std::size_t j = 0; j < s.k; ++j) t += s.coefs[c][j] * z[j];
    scores[c] = t;
    mx = std::max(mx, t);
  }
  double denom = 0.0;
  for (double& v : scores) {
    v = std::exp(v - mx);
    denom += v;
  }
  for (double& v : scores) v /= denom;
  return scores;
}

// ---------------------------------------------------------------------------
// Tree surrogate
// ---------------------------------------------------------------------------

/// Greedy CART with Gini impurity; left child takes z_r <= threshold.
struct TreeSurrogate {
  struct TreeNode {
    bool is_leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
    std::vector<std::size_t> histogram;
  };
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  std::size_t k = 0;
  std::size_t classes = 2;
  std::size_t max_depth = 4;
  std::size_t min_leaf = 5;

  int leaf_index(std::span<const double> z) const {
    if (z.size() != k) throw dimension_error("tree: latent length mismatch");
    int cur = 0;
    while (!nodes[static_cast<std::size_t>(cur)].is_leaf) {
      const auto& nd = nodes[static_cast<std::size_t>(cur)];
      cur = z[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return cur;
  }

  int predict(std::span<const double> z) const {
    return nodes[static_cast<std::size_t>(leaf_index(z))].label;
  }
};

namespace detail {

inline double gini(const std::vector<std::size_t>& counts, std::size_t total) {
  if (total == 0) return 0.0;
  double g = 1.0;
  for (std::size_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    g -= p * p;
  }
  return g;
}

inline int grow_tree(TreeSurrogate& tree, const Tensor& Z, const std::vector<int>& y,
                     std::vector<std::size_t> rows, std::size_t depth) {
  const std::size_t classes = tree.classes;
  std::vector<std::size_t> hist(classes, 0);
  for (std::size_t i : rows) hist[static_cast<std::size_t>(y[i])]++;
  int majority = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (hist[c] > hist[static_cast<std::size_t>(majority)]) majority = static_cast<int>(c);

  TreeSurrogate::TreeNode node;
  node.label = majority;
  node.histogram = hist;

  const double parent_gini = gini(hist, rows.size());
  bool split_allowed = depth < tree.max_depth && parent_gini > 0.0 &&
                       rows.size() >= 2 * tree.min_leaf;

  std::size_t best_feature = 0;
  double best_threshold = 0.0;
  double best_score = -1.0;
  if (split_allowed) {
    std::vector<std::pair<double, int>> vals(rows.size());
    for (std::size_t f = 0; f < tree.k; ++f) {
      for (std::size_t i = 0; i < rows.size(); ++i)
        vals[i] = {Z.at(rows[i], f), y[rows[i]]};
      std::sort(vals.begin(), vals.end());
      std::vector<std::size_t> left(classes, 0);
      std::size_t nl = 0;
      for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
        left[static_cast<std::size_t>(vals[i].second)]++;
        ++nl;
        if (vals[i].first == vals[i + 1].first) continue;  // not a boundary
        const std::size_t nr = rows.size() - nl;
        if (nl < tree.min_leaf || nr < tree.min_leaf) continue;
        std::vector<std::size_t> right(classes, 0);
        for (std::size_t c = 0; c < classes; ++c) right[c] = hist[c] - left[c];
        const double wg =
            (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
            static_cast<double>(rows.size());
        const double gain = parent_gini - wg;
        if (gain > best_score + 1e-15) {
          best_score = gain;
          best_feature = f;
          best_threshold = (vals[i].first + vals[i + 1].first) / 2.0;  // midpoint
        }
      }
    }
  }

  const int my_index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(node);
  if (best_score > 1e-12) {
    std::vector<std::size_t> lrows, rrows;
    for (std::size_t i : rows) {
      if (Z.at(i, best_feature) <= best_threshold)
        lrows.push_back(i);
      else
        rrows.push_back(i);
    }
    const int l = grow_tree(tree, Z, y, std::move(lrows), depth + 1);
    const int r = grow_tree(tree, Z, y, std::move(rrows), depth + 1);
    auto& me = tree.nodes[static_cast<std::size_t>(my_index)];
    me.is_leaf = false;
    me.feature = best_feature;
    me.threshold = best_threshold;
    me.left = l;
    me.right = r;
  }
  return my_index;
}

}  // namespace detail

inline TreeSurrogate fit_tree(const Tensor& Z, const std::vector<int>& labels,
                              std::size_t max_depth = 4, std::size_t min_leaf = 5) {
  const std::size_t n = Z.rows();
  if (n < 1) throw contract_error("fit_tree: empty input");
  if (labels.size() != n) throw contract_error("fit_tree: labels misaligned");
  TreeSurrogate tree;
  tree.k = Z.cols();
  int max_label = 0;
  for (int c : labels) max_label = std::max(max_label, c);
  tree.classes = static_cast<std::size_t>(max_label) + 1;
  tree.classes = std::max<std::size_t>(tree.classes, 2);
  tree.max_depth = max_depth;
  tree.min_leaf = min_leaf;
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  detail::grow_tree(tree, Z, labels, std::move(rows), 0);
  return tree;
}

// ---------------------------------------------------------------------------
// Latent rules
// ---------------------------------------------------------------------------

/// Per-latent-feature interval conjunction from a root-leaf path. Bounds carry
/// the tree's split semantics: lower bounds are exclusive (z > l), upper
/// bounds inclusive (z <= u); ±inf marks an unconstrained side.
struct LatentRule {
  std::vector<double> lower;
  std::vector<double> upper;
  int label = 0;

  bool contains(std::span<const double> z) const {
    for (std::size_t r = 0; r < lower.size(); ++r)
      if (!(z[r] > lower[r] && z[r] <= upper[r])) return false;
    return true;
  }
};

inline LatentRule extract_latent_rule(const TreeSurrogate& tree, std::span<const double> z) {
  LatentRule rule;
  rule.lower.assign(tree.k, -kInf);
  rule.upper.assign(tree.k, kInf);
  int cur = 0;
  while (!tree.nodes[static_cast<std::size_t>(cur)].is_leaf) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(cur)];
    if (z[nd.feature] <= nd.threshold) {
      rule.upper[nd.feature] = std::min(rule.upper[nd.feature], nd.threshold);
      cur = nd.left;
    } else {
      rule.lower[nd.feature] = std::max(rule.lower[nd.feature], nd.threshold);
      cur = nd.right;
    }
  }
  rule.label = tree.nodes[static_cast<std::size_t>(cur)].label;
  return rule;
}

/// Latent rule of a specific leaf (the conjunction along its root path).
inline LatentRule leaf_rule(const TreeSurrogate& tree, int leaf) {
  LatentRule rule;
  rule.lower.assign(tree.k, -kInf);
  rule.upper.assign(tree.k, kInf);
  // Walk down from the root following the unique path to `leaf`.
  std::vector<int> path;
  std::function<bool(int)> dfs = [&](int node) {
    path.push_back(node);
    if (node == leaf) return true;
    const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
    if (!nd.is_leaf) {
      if (dfs(nd.left) || dfs(nd.right)) return true;
    }
    path.pop_back();
    return false;
  };
  if (!dfs(0)) throw contract_error("leaf_rule: leaf not in tree");
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const auto& nd = tree.nodes[static_cast<std::size_t>(path[i])];
    if (path[i + 1] == nd.left)
      rule.upper[nd.feature] = std::min(rule.upper[nd.feature], nd.threshold);
    else
      rule.lower[nd.feature] = std::max(rule.lower[nd.feature], nd.threshold);
  }
  rule.label = tree.nodes[static_cast<std::size_t>(leaf)].label;
  return rule;
}

/// Depth tuned on a held-out slice by accuracy; ties prefer the shallower
/// tree. Refit on everything with the winner.
inline TreeSurrogate fit_tree_tuned(const Tensor& Z, const std::vector<int>& labels,
                                    const std::vector<std::size_t>& depth_grid,
                                    std::uint64_t seed, std::size_t min_leaf = 5) {
  const std::size_t n = Z.rows();
  if (n < 10) return fit_tree(Z, labels, depth_grid.empty() ? 4 : depth_grid.front(), min_leaf);
  Rng rng(seed);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  const std::size_t n_val = std::max<std::size_t>(n / 5, 1);
  std::vector<std::size_t> val(idx.begin(), idx.begin() + n_val);
  std::vector<std::size_t> tr(idx.begin() + n_val, idx.end());

  Tensor Ztr = Tensor::zeros({tr.size(), Z.cols()});
  std::vector<int> ytr(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    for (std::size_t j = 0; j < Z.cols(); ++j) Ztr.at(i, j) = Z.at(tr[i], j);
    ytr[i] = labels[tr[i]];
  }
  std::size_t best_depth = depth_grid.front();
  double best_acc = -1.0;
  for (std::size_t d : depth_grid) {
    auto t = fit_tree(Ztr, ytr, d, min_leaf);
    std::size_t hits = 0;
    for (std::size_t i : val)
      if (t.predict(Z.row_values(i)) == labels[i]) ++hits;
    const double acc = static_cast<double>(hits) / static_cast<double>(val.size());
    if (acc > best_acc + 1e-12) {
      best_acc = acc;
      best_depth = d;
    }
  }
  return fit_tree(Z, labels, best_depth, min_leaf);
}

}  // namespace illume::surrogate

#endif  // ILLUME_SURROGATE_HPP
