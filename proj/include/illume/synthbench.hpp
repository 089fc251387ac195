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
#ifndef ILLUME_SYNTHBENCH_HPP
#define ILLUME_SYNTHBENCH_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "illume/common.hpp"
#include "illume/explain.hpp"
#include "illume/tensor.hpp"

namespace illume::synthbench {

/// Transparent-classifier grid: t informative features plus u uninformative
/// ones, standard-normal instances, five classifiers per family.
struct SyntheticConfig {
  std::size_t t = 4;
  std::size_t u = 0;
  std::size_t n_instances = 2048;
  std::size_t n_classifiers = 5;
  std::uint64_t seed = 0;

  std::size_t m() const { return t + u; }

  /// Standard grid entry: m in {4, 8, 16, 32, 64}, t = min(16, m).
  static SyntheticConfig standard(std::size_t m_total, std::uint64_t seed) {
    SyntheticConfig c;
    c.t = std::min<std::size_t>(16, m_total);
    c.u = m_total - c.t;
    c.seed = seed;
    return c;
  }
};

inline Tensor gen_dataset(const SyntheticConfig& cfg, std::uint64_t salt = 0) {
  Rng rng(Rng(cfg.seed).fork(0xDA7A ^ salt).next_u64());
  Tensor X = Tensor::zeros({cfg.n_instances, cfg.m()});
  for (double& v : X.data()) v = rng.normal();
  return X;
}

// ---------------------------------------------------------------------------
// Linear family
// ---------------------------------------------------------------------------

struct TransparentLinear {
  std::vector<double> w;  // exactly zero on uninformative dims
  double w0 = 0.0;

  std::vector<double> predict_proba(std::span<const double> x) const {
    double t = w0;
    for (std::size_t j = 0; j < w.size(); ++j) t += w[j] * x[j];
    const double p = 1.0 / (1.0 + std::exp(-t));
    return {1.0 - p, p};
  }
  int predict(std::span<const double> x) const {
    return predict_proba(x)[1] >= 0.5 ? 1 : 0;
  }
};

inline TransparentLinear make_linear(const SyntheticConfig& cfg, std::size_t index) {
  if (index >= cfg.n_classifiers) throw contract_error("make_linear: index out of range");
  Rng rng(Rng(cfg.seed).fork(0x11EA0 + index).next_u64());
  TransparentLinear clf;
  clf.w.assign(cfg.m(), 0.0);
  for (std::size_t j = 0; j < cfg.t; ++j) clf.w[j] = rng.uniform(-1.0, 1.0);
  clf.w0 = rng.uniform(-1.0, 1.0);
  return clf;
}

/// Ground-truth attribution: the coefficient vector itself (cosine scoring is
/// scale-invariant, so this measures recovery of the global direction).
inline std::vector<double> gt_importance(const TransparentLinear& clf) { return clf.w; }

// ---------------------------------------------------------------------------
// Rule-based family
// ---------------------------------------------------------------------------

struct TransparentRuleBased {
  struct Node {
    bool is_leaf = true;
    std::size_t feature = 0;
    double threshold = 0.0;
    int left = -1, right = -1;
    int label = 0;
  };
  std::vector<Node> nodes;
  std::size_t m = 0;

  int leaf_of(std::span<const double> x) const {
    int cur = 0;
    while (!nodes[static_cast<std::size_t>(cur)].is_leaf) {
      const auto& nd = nodes[static_cast<std::size_t>(cur)];
      cur = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return cur;
  }
  int predict(std::span<const double> x) const {
    return nodes[static_cast<std::size_t>(leaf_of(x))].label;
  }
  std::vector<double> predict_proba(std::span<const double> x) const {
    const int c = predict(x);
    return {c == 0 ? 1.0 : 0.0, c == 1 ? 1.0 : 0.0};
  }
};

/// Full random binary tree of depth ceil(log2 t) capped at 4; every split uses
/// an informative feature with a uniform(-1,1) threshold, leaves alternate
/// labels left to right so both classes exist.
inline TransparentRuleBased make_rulebased(const SyntheticConfig& cfg, std::size_t index) {
  if (index >= cfg.n_classifiers) throw contract_error("make_rulebased: index out of range");
  Rng rng(Rng(cfg.seed).fork(0x201EE + index).next_u64());
  TransparentRuleBased clf;
  clf.m = cfg.m();
  std::size_t depth = 1;
  while ((std::size_t{1} << depth) < cfg.t) ++depth;  // ceil(log2 t)
  depth = std::min<std::size_t>(depth, 4);

  int leaf_counter = 0;
  std::function<int(std::size_t)> build = [&](std::size_t d) -> int {
    const int my = static_cast<int>(clf.nodes.size());
    clf.nodes.emplace_back();
    if (d == depth) {
      clf.nodes[static_cast<std::size_t>(my)].label = leaf_counter++ % 2;
      return my;
    }
    auto& nd = clf.nodes[static_cast<std::size_t>(my)];
    nd.is_leaf = false;
    nd.feature = rng.uniform_index(cfg.t);  // informative features only
    nd.threshold = rng.uniform(-1.0, 1.0);
    const int l = build(d + 1);
    const int r = build(d + 1);
    clf.nodes[static_cast<std::size_t>(my)].left = l;
    clf.nodes[static_cast<std::size_t>(my)].right = r;
    return my;
  };
  build(0);
  return clf;
}

/// Ground-truth rule: the conjunction along x's root-leaf path.
inline explain::AxisRule gt_rule(const TransparentRuleBased& clf, std::span<const double> x) {
  explain::AxisRule rule;
  rule.lower.assign(clf.m, -kInf);
  rule.upper.assign(clf.m, kInf);
  int cur = 0;
  while (!clf.nodes[static_cast<std::size_t>(cur)].is_leaf) {
    const auto& nd = clf.nodes[static_cast<std::size_t>(cur)];
    if (x[nd.feature] <= nd.threshold) {
      rule.upper[nd.feature] = std::min(rule.upper[nd.feature], nd.threshold);
      cur = nd.left;
    } else {
      rule.lower[nd.feature] = std::max(rule.lower[nd.feature], nd.threshold);
      cur = nd.right;
    }
  }
  rule.label = clf.nodes[static_cast<std::size_t>(cur)].label;
  return rule;
}

}  // namespace illume::synthbench

#endif  // ILLUME_SYNTHBENCH_HPP
