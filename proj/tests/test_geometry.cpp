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
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "illume/common.hpp"
#include "illume/geometry.hpp"

using namespace illume;
using namespace illume::geometry;

TEST_CASE("cosine distance", "[geometry]") {
  std::vector<double> u{1.0, 2.0, -0.5};
  CHECK(cosine_distance(u, u) == Catch::Approx(0.0).margin(1e-15));
  std::vector<double> a{1.0, 0.0}, b{0.0, 3.0};
  CHECK(cosine_distance(a, b) == Catch::Approx(1.0));
  std::vector<double> neg{-1.0, -2.0, 0.5};
  CHECK(cosine_distance(u, neg) == Catch::Approx(2.0));
  std::vector<double> zero{0.0, 0.0, 0.0};
  CHECK(cosine_distance(u, zero) == 1.0);  // documented neutral fallback
  CHECK_THROWS_AS(cosine_distance(a, u), dimension_error);
}

TEST_CASE("hamming distance", "[geometry]") {
  std::vector<double> u{1, 0, 0, 1}, v{1, 1, 0, 0};
  CHECK(hamming_distance(u, u) == 0.0);
  std::vector<double> w{0, 1, 1, 0};
  CHECK(hamming_distance(u, w) == 1.0);
  CHECK(hamming_distance(u, v) == 0.5);
  std::vector<double> shorter{1, 0};
  CHECK_THROWS_AS(hamming_distance(u, shorter), dimension_error);
}

TEST_CASE("mixed input distance", "[geometry]") {
  // h = 0: plain cosine on the full vector.
  auto s0 = FeatureSchema::all_continuous(3);
  std::vector<double> x{1.0, 2.0, 3.0}, y{0.5, -1.0, 2.0};
  CHECK(input_distance(x, y, s0) == Catch::Approx(cosine_distance(x, y)));

  // All categorical, identical categories.
  FeatureSchema s1;
  s1.m = 4;
  s1.categorical_groups = {{0, 1}, {2, 3}};
  s1.validate();
  std::vector<double> c{1, 0, 0, 1};
  CHECK(input_distance(c, c, s1) == 0.0);

  // m=4, h=2, continuous cosine distance 0.5, equal categories -> 0.25.
  FeatureSchema s2;
  s2.m = 4;
  s2.continuous_indices = {0, 1};
  s2.categorical_groups = {{2, 3}};
  s2.validate();
  std::vector<double> p{1.0, 0.0, 1.0, 0.0};
  std::vector<double> q{0.5, std::sqrt(3.0) / 2.0, 1.0, 0.0};
  CHECK(input_distance(p, q, s2) == Catch::Approx(0.25));
}

TEST_CASE("input distance symmetry and identity", "[geometry]") {
  Rng rng(4);
  FeatureSchema s;
  s.m = 5;
  s.continuous_indices = {0, 1, 2};
  s.categorical_groups = {{3, 4}};
  s.validate();
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(5), b(5);
    for (int j = 0; j < 3; ++j) {
      a[j] = rng.uniform(-2, 2);
      b[j] = rng.uniform(-2, 2);
    }
    const bool ca = rng.uniform() < 0.5, cb = rng.uniform() < 0.5;
    a[3] = ca ? 1 : 0;
    a[4] = ca ? 0 : 1;
    b[3] = cb ? 1 : 0;
    b[4] = cb ? 0 : 1;
    CHECK(input_distance(a, b, s) == Catch::Approx(input_distance(b, a, s)).margin(1e-15));
    CHECK(input_distance(a, a, s) == Catch::Approx(0.0).margin(1e-12));
    CHECK(input_distance(a, b, s) >= -1e-15);
  }
}

TEST_CASE("transform distance", "[geometry]") {
  Tensor wa = Tensor::matrix(2, 2, {1.0, 0.0, 0.5, 1.0});
  CHECK(transform_distance(wa, wa) == Catch::Approx(0.0).margin(1e-15));

  Tensor o1 = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
  Tensor o2 = Tensor::matrix(2, 2, {0.0, 1.0, 1.0, 0.0});  // columns orthogonal pairwise
  CHECK(transform_distance(o1, o2) == Catch::Approx(1.0));

  // One identical column, one opposite column: (0 + 2)/2 = 1.
  Tensor a = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
  Tensor b = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, -1.0});
  CHECK(transform_distance(a, b) == Catch::Approx(1.0));
  CHECK_THROWS_AS(transform_distance(a, Tensor::matrix(1, 2, {1, 2})), dimension_error);
}

TEST_CASE("neighbor distribution", "[geometry]") {
  // Three equidistant points: every off-diagonal entry is 1/2.
  Tensor d3 = Tensor::matrix(3, 3, {0, 1, 1, 1, 0, 1, 1, 1, 0});
  auto nd = neighbor_distribution(d3);
  nd.check();
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(nd.rows.at(i, j) == Catch::Approx(i == j ? 0.0 : 0.5).margin(1e-12));

  // One near neighbor, one far: probability concentrates on the near one.
  Tensor dfar = Tensor::matrix(3, 3, {0, 0, 9, 0, 0, 9, 9, 9, 0});
  auto nf = neighbor_distribution(dfar);
  CHECK(nf.rows.at(0, 1) == Catch::Approx(1.0).margin(1e-12));
  CHECK(nf.rows.at(0, 2) == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(neighbor_distribution(Tensor::matrix(1, 1, {0})), contract_error);
}

TEST_CASE("neighbor distribution matches unshifted formula", "[geometry]") {
  Rng rng(17);
  const std::size_t n = 5;
  Tensor D = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = rng.uniform(0.0, 2.0);
      D.at(i, j) = d;
      D.at(j, i) = d;
    }
  auto nd = neighbor_distribution(D);
  nd.check();
  for (std::size_t i = 0; i < n; ++i) {
    double denom = 0.0;
    for (std::size_t v = 0; v < n; ++v)
      if (v != i) denom += std::exp(-D.at(i, v) * D.at(i, v));
    for (std::size_t j = 0; j < n; ++j) {
      const double want = j == i ? 0.0 : std::exp(-D.at(i, j) * D.at(i, j)) / denom;
      CHECK(std::abs(nd.rows.at(i, j) - want) <= 1e-12);
    }
  }
}

TEST_CASE("neighbor rows stay normalized under distance rescaling", "[geometry]") {
  Rng rng(23);
  const std::size_t n = 6;
  Tensor D = Tensor::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = rng.uniform(0.1, 1.5);
      D.at(i, j) = d;
      D.at(j, i) = d;
    }
  for (double f : {0.25, 1.0, 3.0}) {
    Tensor Ds = D;
    for (double& v : Ds.data()) v *= f;
    auto nd = neighbor_distribution(Ds);
    nd.check();  // throws if a row drifts from 1 by more than 1e-9
  }
}

TEST_CASE("kl_row", "[geometry]") {
  std::vector<double> p{0.3, 0.7}, q{0.3, 0.7};
  CHECK(kl_row(p, q) == Catch::Approx(0.0).margin(1e-15));
  std::vector<double> p2{1.0, 0.0}, q2{0.5, 0.5};
  CHECK(kl_row(p2, q2) == Catch::Approx(std::log(2.0)));

  Rng rng(31);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 4;
    std::vector<double> a(n), b(n);
    double sa = 0, sb = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(0.0, 1.0);
      b[i] = rng.uniform(0.0, 1.0);
      sa += a[i];
      sb += b[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      a[i] /= sa;
      b[i] /= sb;
    }
    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (a[i] > 0) direct += a[i] * std::log(a[i] / std::max(b[i], 1e-12));
    CHECK(std::abs(kl_row(a, b) - direct) <= 1e-12);
    CHECK(kl_row(a, b) >= -1e-12);  // nonnegativity
  }
}
