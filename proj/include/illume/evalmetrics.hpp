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
#ifndef ILLUME_EVALMETRICS_HPP
#define ILLUME_EVALMETRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "illume/common.hpp"
#include "illume/explain.hpp"

namespace illume::evalmetrics {

using DistFn = std::function<double(std::size_t, std::size_t)>;
using SimFn = std::function<double(std::size_t, std::size_t)>;

// ---------------------------------------------------------------------------
// Attribution and rule proximity
// ---------------------------------------------------------------------------

/// Cosine similarity; a zero vector scores 0 by convention.
inline double cs_score(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw dimension_error("cs_score: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Bound-proximity of a predicted rule against a ground-truth rule. Only
/// slots whose ground-truth bound is finite count; a finite-vs-infinite pair
/// contributes zero (1/(1±inf) = 0).
inline double cplt_score(const explain::AxisRule& pred, const explain::AxisRule& gt) {
  if (pred.lower.size() != gt.lower.size()) throw dimension_error("cplt_score: rank mismatch");
  std::size_t counted = 0;
  double sum = 0.0;
  auto slot = [&](double p, double g) {
    if (!std::isfinite(g)) return;
    ++counted;
    if (!std::isfinite(p)) return;  // contributes zero
    const double d = p - g;
    sum += 1.0 / (1.0 + d * d);
  };
  for (std::size_t j = 0; j < gt.lower.size(); ++j) {
    slot(pred.lower[j], gt.lower[j]);
    slot(pred.upper[j], gt.upper[j]);
  }
  if (counted == 0) {
    for (std::size_t j = 0; j < pred.lower.size(); ++j)
      if (std::isfinite(pred.lower[j]) || std::isfinite(pred.upper[j])) return 0.0;
    return 1.0;  // both rules vacuous
  }
  return sum / static_cast<double>(counted);
}

/// Symmetric rule proximity used for explanation-to-explanation comparison:
/// slots finite in at least one rule count; both-infinite slots are excluded.
inline double rule_similarity(const explain::AxisRule& a, const explain::AxisRule& b) {
  if (a.lower.size() != b.lower.size())
    throw dimension_error("rule_similarity: rank mismatch");
  std::size_t counted = 0;
  double sum = 0.0;
  auto slot = [&](double x, double y) {
    const bool fx = std::isfinite(x), fy = std::isfinite(y);
    if (!fx && !fy) return;
    ++counted;
    if (fx && fy) {
      const double d = x - y;
      sum += 1.0 / (1.0 + d * d);
    }
  };
  for (std::size_t j = 0; j < a.lower.size(); ++j) {
    slot(a.lower[j], b.lower[j]);
    slot(a.upper[j], b.upper[j]);
  }
  return counted == 0 ? 1.0 : sum / static_cast<double>(counted);
}

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

/// Ranks with average-tie handling (1-based).
inline std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (average-rank ties). A constant input yields 0;
/// `degenerate` reports that case when provided.
inline double spearman(std::span<const double> a, std::span<const double> b,
                       bool* degenerate = nullptr) {
  if (a.size() != b.size()) throw dimension_error("spearman: length mismatch");
  if (a.size() < 2) throw contract_error("spearman: need at least two pairs");
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (degenerate) *degenerate = false;
  if (va == 0.0 || vb == 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return cov / std::sqrt(va * vb);
}

// ---------------------------------------------------------------------------
// Latent-space quality
// ---------------------------------------------------------------------------

/// Leave-one-out K-NN accuracy under a pairwise distance.
inline double loo_knn_accuracy(std::size_t n, const DistFn& dist,
                               const std::vector<int>& labels, std::size_t K) {
  if (n <= K) throw contract_error("knn: need more rows than K");
  std::size_t hits = 0;
  std::vector<std::size_t> idx(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t w = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) idx[w++] = j;
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(K), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                        const double da = dist(i, a), db = dist(i, b);
                        return da < db || (da == db && a < b);
                      });
    std::map<int, std::size_t> votes;
    for (std::size_t t = 0; t < K; ++t) votes[labels[idx[t]]]++;
    int best = votes.begin()->first;
    for (const auto& [lab, cnt] : votes)
      if (cnt > votes[best]) best = lab;  // vote ties keep the smallest label
    hits += best == labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

/// Ratio of K-NN accuracy in the latent space to the input space.
inline double knn_gain(std::size_t n, const DistFn& input_dist, const DistFn& latent_dist,
                       const std::vector<int>& labels, std::size_t K = 5) {
  const double acc_x = loo_knn_accuracy(n, input_dist, labels, K);
  const double acc_z = loo_knn_accuracy(n, latent_dist, labels, K);
  if (acc_x == 0.0) throw undefined_ratio_error("knn_gain: zero input-space accuracy");
  return acc_z / acc_x;
}

/// Fraction of sampled (i, {j, v}) triplets whose pairwise-distance ordering
/// agrees between the two spaces; exact ties agree only with exact ties.
inline double triplet_accuracy(const DistFn& dist_a, const DistFn& dist_b, std::size_t n,
                               std::size_t n_triplets, std::uint64_t seed) {
  if (n < 3) throw contract_error("triplet_accuracy: need at least three points");
  Rng rng(seed);
  auto sgn = [](double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
  std::size_t agree = 0;
  for (std::size_t t = 0; t < n_triplets; ++t) {
    const std::size_t i = rng.uniform_index(n);
    std::size_t j = rng.uniform_index(n);
    while (j == i) j = rng.uniform_index(n);
    std::size_t v = rng.uniform_index(n);
    while (v == i || v == j) v = rng.uniform_index(n);
    const int sa = sgn(dist_a(i, j) - dist_a(i, v));
    const int sb = sgn(dist_b(i, j) - dist_b(i, v));
    agree += sa == sb ? 1 : 0;
  }
  return static_cast<double>(agree) / static_cast<double>(n_triplets);
}

// ---------------------------------------------------------------------------
// Explanation quality
// ---------------------------------------------------------------------------

struct RobustnessReport {
  std::vector<double> per_instance;  // aligned with instances; NaN when excluded
  std::vector<char> included;
  std::vector<char> truncated;  // fewer than K_max same-label neighbors
  double mean = 0.0;
  std::size_t n_excluded = 0;
};

/// Average over K = 1..K_max of the worst explanation similarity inside the
/// K nearest same-label neighbors; higher is better.
inline RobustnessReport robustness_max_sensitivity(std::size_t n, const DistFn& input_dist,
                                                   const std::vector<int>& pred_labels,
                                                   const SimFn& sim, std::size_t K_max = 20) {
  RobustnessReport rep;
  rep.per_instance.assign(n, std::numeric_limits<double>::quiet_NaN());
  rep.included.assign(n, 0);
  rep.truncated.assign(n, 0);
  double total = 0.0;
  std::size_t used = 0;
  std::vector<std::size_t> nbrs;
  for (std::size_t i = 0; i < n; ++i) {
    nbrs.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && pred_labels[j] == pred_labels[i]) nbrs.push_back(j);
    if (nbrs.empty()) {
      ++rep.n_excluded;
      continue;
    }
    std::sort(nbrs.begin(), nbrs.end(), [&](std::size_t a, std::size_t b) {
      const double da = input_dist(i, a), db = input_dist(i, b);
      return da < db || (da == db && a < b);
    });
    const std::size_t K_avail = std::min(K_max, nbrs.size());
    if (K_avail < K_max) rep.truncated[i] = 1;
    double running = kInf, acc = 0.0;
    for (std::size_t K = 1; K <= K_avail; ++K) {
      running = std::min(running, sim(i, nbrs[K - 1]));
      acc += running;
    }
    rep.per_instance[i] = acc / static_cast<double>(K_avail);
    rep.included[i] = 1;
    total += rep.per_instance[i];
    ++used;
  }
  rep.mean = used ? total / static_cast<double>(used) : 0.0;
  return rep;
}

/// Spearman correlation between explanation dissimilarity (1 - sim) and the
/// L2 distance of black-box probability rows, over all pairs i < j.
inline double faithfulness(std::size_t n, const SimFn& sim, const Tensor& bb_probs,
                           bool* degenerate = nullptr) {
  if (n < 3) throw contract_error("faithfulness: need at least three instances");
  std::vector<double> de, db;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      de.push_back(1.0 - sim(i, j));
      double d = 0.0;
      for (std::size_t c = 0; c < bb_probs.cols(); ++c) {
        const double t = bb_probs.at(i, c) - bb_probs.at(j, c);
        d += t * t;
      }
      db.push_back(std::sqrt(d));
    }
  return spearman(de, db, degenerate);
}

/// Spearman between explanation dissimilarity and input distance, restricted
/// to pairs with the same predicted label.
inline double global_robustness(std::size_t n, const SimFn& sim, const DistFn& input_dist,
                                const std::vector<int>& pred_labels,
                                bool* degenerate = nullptr) {
  std::vector<double> de, dx;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      if (pred_labels[i] != pred_labels[j]) continue;
      de.push_back(1.0 - sim(i, j));
      dx.push_back(input_dist(i, j));
    }
  if (de.size() < 3) throw contract_error("global_robustness: need >= 3 accordant pairs");
  return spearman(de, dx, degenerate);
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct MetricReport {
  std::string metric;
  std::map<std::string, std::string> config;
  std::vector<double> per_instance;
  double mean = 0.0;
  double mad = 0.0;  // median absolute deviation
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline MetricReport summarize(std::string name, std::vector<double> per_instance,
                              std::map<std::string, std::string> config = {}) {
  MetricReport r;
  r.metric = std::move(name);
  r.config = std::move(config);
  double s = 0.0;
  for (double v : per_instance) s += v;
  r.mean = per_instance.empty() ? 0.0 : s / static_cast<double>(per_instance.size());
  const double med = median(per_instance);
  std::vector<double> dev;
  dev.reserve(per_instance.size());
  for (double v : per_instance) dev.push_back(std::abs(v - med));
  r.mad = median(std::move(dev));
  r.per_instance = std::move(per_instance);
  return r;
}

}  // namespace illume::evalmetrics

#endif  // ILLUME_EVALMETRICS_HPP
