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
#ifndef ILLUME_GEOMETRY_HPP
#define ILLUME_GEOMETRY_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "illume/common.hpp"
#include "illume/tensor.hpp"

namespace illume::geometry {

/// Column layout of a preprocessed feature matrix: which of the m columns are
/// continuous and how the one-hot categorical columns group together.
struct FeatureSchema {
  std::size_t m = 0;
  std::vector<std::size_t> continuous_indices;
  std::vector<std::vector<std::size_t>> categorical_groups;

  std::size_t categorical_column_count() const {
    std::size_t h = 0;
    for (const auto& g : categorical_groups) h += g.size();
    return h;
  }

  static FeatureSchema all_continuous(std::size_t m) {
    FeatureSchema s;
    s.m = m;
    s.continuous_indices.resize(m);
    for (std::size_t j = 0; j < m; ++j) s.continuous_indices[j] = j;
    return s;
  }

  void validate() const {
    std::vector<char> seen(m, 0);
    auto mark = [&](std::size_t j) {
      if (j >= m || seen[j]) throw contract_error("schema: indices do not partition features");
      seen[j] = 1;
    };
    for (std::size_t j : continuous_indices) mark(j);
    for (const auto& g : categorical_groups)
      for (std::size_t j : g) mark(j);
    for (char c : seen)
      if (!c) throw contract_error("schema: indices do not partition features");
  }
};

/// 1 - u·v/(‖u‖‖v‖), in [0, 2]. A zero-norm operand yields the neutral
/// distance 1.
inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw dimension_error("cosine_distance: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 1.0;
  return 1.0 - dot / (std::sqrt(nu) * std::sqrt(nv));
}

/// Fraction of disagreeing coordinates of two 0/1 vectors.
inline double hamming_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw dimension_error("hamming_distance: length mismatch");
  if (u.empty()) return 0.0;
  std::size_t diff = 0;
  for (std::size_t i = 0; i < u.size(); ++i)
    if (u[i] != v[i]) ++diff;
  return static_cast<double>(diff) / static_cast<double>(u.size());
}

/// Mixed input distance: ((m-h)/m)·cosine on continuous columns plus
/// (h/m)·hamming on one-hot columns.
inline double input_distance(std::span<const double> xi, std::span<const double> xj,
                             const FeatureSchema& schema) {
  if (xi.size() != schema.m || xj.size() != schema.m)
    throw dimension_error("input_distance: vector does not conform to schema");
  const double m = static_cast<double>(schema.m);
  const double h = static_cast<double>(schema.categorical_column_count());
  double d = 0.0;
  if (!schema.continuous_indices.empty()) {
    std::vector<double> ui, vi;
    ui.reserve(schema.continuous_indices.size());
    vi.reserve(schema.continuous_indices.size());
    for (std::size_t j : schema.continuous_indices) {
      ui.push_back(xi[j]);
      vi.push_back(xj[j]);
    }
    d += (m - h) / m * cosine_distance(ui, vi);
  }
  if (h > 0.0) {
    std::vector<double> uc, vc;
    for (const auto& g : schema.categorical_groups)
      for (std::size_t j : g) {
        uc.push_back(xi[j]);
        vc.push_back(xj[j]);
      }
    d += h / m * hamming_distance(uc, vc);
  }
  return d;
}

/// Average per-column cosine distance between two m×k transformations.
inline double transform_distance(const Tensor& wa, const Tensor& wb) {
  if (!wa.same_shape(wb)) throw dimension_error("transform_distance: shape mismatch");
  const std::size_t m = wa.rows(), k = wa.cols();
  double d = 0.0;
  std::vector<double> ca(m), cb(m);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < m; ++j) {
      ca[j] = wa.at(j, r);
      cb[j] = wb.at(j, r);
    }
    d += cosine_distance(ca, cb);
  }
  return d / static_cast<double>(k);
}

/// Row-stochastic neighbor probabilities S_{i,j} = e^{-d(i,j)^2} normalized
/// over j ≠ i, with the diagonal forced to zero. Rows are computed with
/// max-shifted exponentials.
struct NeighborDistribution {
  Tensor rows;  // n×n

  void check() const {
    const std::size_t n = rows.rows();
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p = rows.at(i, j);
        if (p < 0.0 || p > 1.0) throw contract_error("neighbor distribution: entry outside [0,1]");
        s += p;
      }
      if (std::abs(s - 1.0) > tol::kRowSum)
        throw contract_error("neighbor distribution: row does not sum to 1");
    }
  }
};

inline NeighborDistribution neighbor_distribution(const Tensor& pairwise) {
  const std::size_t n = pairwise.rows();
  if (n < 2 || pairwise.cols() != n)
    throw contract_error("neighbor_distribution: need a square matrix with n >= 2");
  Tensor S = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    double best = -kInf;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double a = -pairwise.at(i, j) * pairwise.at(i, j);
      if (a > best) best = a;
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double e = std::exp(-pairwise.at(i, j) * pairwise.at(i, j) - best);
      S.at(i, j) = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) S.at(i, j) /= denom;
  }
  return NeighborDistribution{std::move(S)};
}

/// Σ p log(p/q) with 0·log(0/q) = 0 and q floored at 1e-12.
inline double kl_row(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw dimension_error("kl_row: length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p[j] <= 0.0) continue;
    const double qc = q[j] < tol::kProbClamp ? tol::kProbClamp : q[j];
    s += p[j] * std::log(p[j] / qc);
  }
  return s;
}

/// Pairwise matrices used repeatedly by losses and metrics.
template <typename DistFn>
Tensor pairwise_matrix(std::size_t n, DistFn&& dist) {
  Tensor D = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      D.at(i, j) = d;
      D.at(j, i) = d;
    }
  return D;
}

inline double euclidean_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw dimension_error("euclidean_distance: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace illume::geometry

#endif  // ILLUME_GEOMETRY_HPP
