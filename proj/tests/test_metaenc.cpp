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

#include "illume/metaenc.hpp"

using namespace illume;
using namespace illume::metaenc;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0,
                     double hi = 1.0) {
  Tensor t = Tensor::zeros({r, c});
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Straight-line KL objective: unshifted kernels, explicit loops.
std::pair<double, double> kl_oracle(const EncodedBatch& b,
                                    const geometry::FeatureSchema& schema) {
  const std::size_t n = b.X.rows();
  auto dist_matrix = [&](auto&& d) {
    std::vector<std::vector<double>> D(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) D[i][j] = d(i, j);
    return D;
  };
  auto to_probs = [&](const std::vector<std::vector<double>>& D) {
    std::vector<std::vector<double>> P(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      double denom = 0.0;
      for (std::size_t v = 0; v < n; ++v)
        if (v != i) denom += std::exp(-D[i][v] * D[i][v]);
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) P[i][j] = std::exp(-D[i][j] * D[i][j]) / denom;
    }
    return P;
  };
  auto kl = [&](const std::vector<std::vector<double>>& P,
                const std::vector<std::vector<double>>& Q) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (P[i][j] > 0.0) s += P[i][j] * std::log(P[i][j] / std::max(Q[i][j], 1e-12));
    return s / static_cast<double>(n);
  };
  auto PX = to_probs(dist_matrix([&](std::size_t i, std::size_t j) {
    return geometry::input_distance(b.X.row_values(i), b.X.row_values(j), schema);
  }));
  auto PY = to_probs(dist_matrix([&](std::size_t i, std::size_t j) {
    return geometry::cosine_distance(b.Y.row_values(i), b.Y.row_values(j));
  }));
  auto PZ = to_probs(dist_matrix([&](std::size_t i, std::size_t j) {
    return geometry::cosine_distance(b.Z.row_values(i), b.Z.row_values(j));
  }));
  auto PW = to_probs(dist_matrix([&](std::size_t i, std::size_t j) {
    return geometry::transform_distance(b.W[i], b.W[j]);
  }));
  return {kl(PX, PZ) + kl(PZ, PW), kl(PY, PZ)};
}

double fd_loss(MetaEncoderModel md, std::size_t pi, std::size_t ei, double h,
               const Tensor& X, const Tensor& Y, const geometry::FeatureSchema& schema,
               const TrainingConfig& cfg, std::size_t alpha_eff) {
  (*md.params()[pi])[ei] += h;
  auto p = make_leaves(md);
  return total_loss(p, X, Y, schema, cfg, md.m, md.k, alpha_eff, 77)->value[0];
}

}  // namespace

TEST_CASE("forward_transform basics", "[metaenc]") {
  auto md = MetaEncoderModel::init(3, 2, 3, 9);
  // Zero final layer: W vanishes for any input.
  md.w3 = Tensor::zeros(md.w3.shape());
  md.b3 = Tensor::zeros(md.b3.shape());
  std::vector<double> x{0.3, -1.2, 0.7};
  Tensor W = md.forward_transform(x);
  for (double v : W.data()) CHECK(v == 0.0);

  auto md2 = MetaEncoderModel::init(3, 2, 3, 10);
  Tensor a = md2.forward_transform(x);
  Tensor b = md2.forward_transform(x);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // determinism

  // Continuity smoke: a 1e-6 nudge moves W by o(1).
  std::vector<double> xp{0.3 + 1e-6, -1.2, 0.7};
  Tensor Wp = md2.forward_transform(xp);
  Tensor W0 = md2.forward_transform(x);
  double fro = 0.0;
  for (std::size_t i = 0; i < Wp.size(); ++i) fro += (Wp[i] - W0[i]) * (Wp[i] - W0[i]);
  CHECK(std::sqrt(fro) < 1e-3);
  CHECK_THROWS_AS(md2.forward_transform(std::vector<double>{1.0}), dimension_error);
}

TEST_CASE("sparsify_topk", "[metaenc]") {
  Rng rng(3);
  Tensor W = random_matrix(4, 3, rng);
  Tensor same = sparsify_topk(W, 4);  // alpha = m keeps everything
  for (std::size_t i = 0; i < W.size(); ++i) CHECK(same[i] == W[i]);

  Tensor col = Tensor::matrix(3, 1, {0.5, -0.9, 0.1});
  Tensor sp = sparsify_topk(col, 2);
  CHECK(sp.at(0, 0) == 0.5);
  CHECK(sp.at(1, 0) == -0.9);
  CHECK(sp.at(2, 0) == 0.0);

  // Tie at the boundary: lower index survives.
  Tensor tie = Tensor::matrix(3, 1, {0.7, -0.7, 0.9});
  Tensor spt = sparsify_topk(tie, 2);
  CHECK(spt.at(0, 0) == 0.7);
  CHECK(spt.at(1, 0) == 0.0);
  CHECK(spt.at(2, 0) == 0.9);

  CHECK_THROWS_AS(sparsify_topk(col, 0), contract_error);
  CHECK_THROWS_AS(sparsify_topk(col, 4), contract_error);
}

TEST_CASE("encode", "[metaenc]") {
  Tensor W = Tensor::zeros({3, 2});
  W.at(1, 0) = 1.0;  // z_0 = x_1
  std::vector<double> x{0.25, -4.0, 2.0};
  auto z = apply_transform(W, x);
  CHECK(z[0] == -4.0);
  CHECK(z[1] == 0.0);

  auto z0 = apply_transform(W, std::vector<double>{0, 0, 0});
  CHECK(z0[0] == 0.0);

  Rng rng(8);
  Tensor Wr = random_matrix(5, 3, rng);
  std::vector<double> xr(5);
  for (double& v : xr) v = rng.uniform(-2, 2);
  auto got = apply_transform(Wr, xr);
  for (std::size_t r = 0; r < 3; ++r) {
    double want = 0.0;
    for (std::size_t j = 0; j < 5; ++j) want += Wr.at(j, r) * xr[j];
    CHECK(std::abs(got[r] - want) <= 1e-12);
  }
}

TEST_CASE("pullback consistency: encode equals sparsified transform applied", "[metaenc]") {
  Rng rng(12);
  auto md = MetaEncoderModel::init(6, 3, 2, 77);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.normal();
    auto z = encode(md, x, 2);
    Tensor Wsp = sparsify_topk(md.forward_transform(x), 2);
    auto z2 = apply_transform(Wsp, x);
    for (std::size_t r = 0; r < 3; ++r) CHECK(std::abs(z[r] - z2[r]) <= 1e-12);
    for (std::size_t r = 0; r < 3; ++r) {
      std::size_t nz = 0;
      for (std::size_t j = 0; j < 6; ++j)
        if (Wsp.at(j, r) != 0.0) ++nz;
      CHECK(nz <= 2);
    }
  }
}

TEST_CASE("loss_kl zero cases and oracle", "[metaenc]") {
  // Orthonormal inputs, identity transforms: P_X = P_Z = P_W (all uniform).
  const std::size_t n = 4, m = 4;
  EncodedBatch b;
  b.X = Tensor::identity(m);
  b.Z = b.X;
  b.Y = b.X;  // P_Y = P_Z too
  for (std::size_t i = 0; i < n; ++i) b.W.push_back(Tensor::identity(m));
  auto schema = geometry::FeatureSchema::all_continuous(m);
  auto [lx, ly] = loss_kl(b, schema);
  CHECK(std::abs(lx) <= 1e-9);
  CHECK(std::abs(ly) <= 1e-9);

  // Random batch of 4 against the straight-line oracle.
  Rng rng(19);
  auto md = MetaEncoderModel::init(5, 2, 5, 3);
  Tensor X = random_matrix(4, 5, rng);
  Tensor Y = Tensor::zeros({4, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    const double p = rng.uniform(0.05, 0.95);
    Y.at(i, 0) = p;
    Y.at(i, 1) = 1 - p;
  }
  auto batch = encode_batch(md, X, Y, 5);
  auto schema5 = geometry::FeatureSchema::all_continuous(5);
  auto [glx, gly] = loss_kl(batch, schema5);
  auto [olx, oly] = kl_oracle(batch, schema5);
  CHECK(std::abs(glx - olx) <= 1e-10);
  CHECK(std::abs(gly - oly) <= 1e-10);
  CHECK_THROWS_AS(loss_kl(EncodedBatch{Tensor::identity(1), Tensor::identity(1), {}, Tensor::identity(1)}, schema5),
                  contract_error);

  // Graph path agrees with the numeric path.
  TrainingConfig cfg;
  cfg.stability_mode = StabilityMode::kPerturbation;
  auto leaves = make_leaves(md);
  auto g = build_batch_graph(leaves, X, 5, 2, 5);
  auto nodes = build_losses(leaves, g, Y, schema5, cfg, 5, 2, 5, 123);
  CHECK(std::abs(nodes.lx_kl->value[0] - olx) <= 1e-10);
  CHECK(std::abs(nodes.ly_kl->value[0] - oly) <= 1e-10);
  // Graph latents match the numeric encode bit for bit.
  for (std::size_t i = 0; i < 4; ++i) {
    auto z = encode(md, X.row_values(i), 5);
    for (std::size_t r = 0; r < 2; ++r) CHECK(g.Z->value.at(i, r) == z[r]);
  }
}

TEST_CASE("loss_soft_orthogonality", "[metaenc]") {
  // Orthonormal columns.
  Tensor ortho = Tensor::zeros({3, 2});
  ortho.at(0, 0) = 1.0;
  ortho.at(1, 1) = 1.0;
  CHECK(loss_soft_orthogonality({ortho}, 3) == Catch::Approx(0.0).margin(1e-12));

  // Two identical unit columns: off-diagonals are 1 -> loss 2.
  Tensor dup = Tensor::zeros({3, 2});
  dup.at(0, 0) = 1.0;
  dup.at(0, 1) = 1.0;
  CHECK(loss_soft_orthogonality({dup}, 3) == Catch::Approx(2.0));

  Rng rng(5);
  Tensor W = random_matrix(4, 3, rng);
  double want = 0.0;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t s = 0; s < 3; ++s) {
      double gram = 0.0;
      for (std::size_t j = 0; j < 4; ++j) gram += W.at(j, r) * W.at(j, s);
      const double d = gram - (r == s ? 1.0 : 0.0);
      want += d * d;
    }
  CHECK(std::abs(loss_soft_orthogonality({W}, 4) - want) <= 1e-12);
}

TEST_CASE("loss_collinearity", "[metaenc]") {
  Rng rng(6);
  const std::size_t n = 1000;
  Tensor Z = Tensor::zeros({n, 3});
  for (double& v : Z.data()) v = rng.normal();
  CHECK(loss_collinearity(Z) <= 0.2);  // independent columns, sampling tolerance

  Tensor dup = Tensor::zeros({50, 2});
  for (std::size_t i = 0; i < 50; ++i) {
    const double v = rng.normal();
    dup.at(i, 0) = v;
    dup.at(i, 1) = v;
  }
  CHECK(loss_collinearity(dup) == Catch::Approx(2.0).margin(1e-9));

  Tensor constant_col = Tensor::zeros({20, 2});
  for (std::size_t i = 0; i < 20; ++i) constant_col.at(i, 0) = rng.normal();
  const double v = loss_collinearity(constant_col);
  CHECK(std::isfinite(v));
}

TEST_CASE("loss_stability zero cases", "[metaenc]") {
  // Constant transform: zero the first layer so the net ignores x.
  auto md = MetaEncoderModel::init(3, 2, 3, 4);
  md.w1 = Tensor::zeros(md.w1.shape());
  Rng rng(31);
  Tensor X = random_matrix(6, 3, rng);
  CHECK(loss_stability(md, X, StabilityMode::kJacobian, 3) <= 1e-9);
  CHECK(loss_stability(md, X, StabilityMode::kPerturbation, 3, 5, 16) <= 1e-9);

  // Identity-like encode: constant W = I (k = m), z = x.
  auto idm = MetaEncoderModel::init(3, 3, 3, 4);
  idm.w1 = Tensor::zeros(idm.w1.shape());
  idm.w3 = Tensor::zeros(idm.w3.shape());
  idm.b3 = Tensor::zeros(idm.b3.shape());
  for (std::size_t j = 0; j < 3; ++j) idm.b3.at(0, j * 3 + j) = 1.0;
  CHECK(loss_stability(idm, X, StabilityMode::kJacobian, 3) <= 1e-9);
}

TEST_CASE("stability modes agree on a small random model", "[metaenc]") {
  auto md = MetaEncoderModel::init(4, 2, 4, 15);
  Rng rng(44);
  Tensor X = random_matrix(8, 4, rng);
  const double jac = loss_stability(md, X, StabilityMode::kJacobian, 4);
  const double pert = loss_stability(md, X, StabilityMode::kPerturbation, 4, 9, 512, 1e-4);
  CHECK(std::abs(pert - jac) / std::max(jac, 1e-12) < 0.10);
}

TEST_CASE("total loss composition and config defaults", "[metaenc]") {
  TrainingConfig defaults;
  CHECK(defaults.learning_rate == 1e-3);
  for (double lam : {defaults.lambda_y, defaults.lambda_st, defaults.lambda_so,
                     defaults.lambda_co}) {
    CHECK((lam == 0.0 || lam == 1.0));
  }

  Rng rng(52);
  auto md = MetaEncoderModel::init(4, 2, 4, 6);
  Tensor X = random_matrix(6, 4, rng);
  Tensor Y = Tensor::zeros({6, 2});
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = rng.uniform(0.1, 0.9);
    Y.at(i, 0) = p;
    Y.at(i, 1) = 1 - p;
  }
  auto schema = geometry::FeatureSchema::all_continuous(4);

  TrainingConfig zero;
  zero.lambda_y = zero.lambda_st = zero.lambda_so = zero.lambda_co = 0.0;
  auto pz = make_leaves(md);
  auto gz = build_batch_graph(pz, X, 4, 2, 4);
  auto nz = build_losses(pz, gz, Y, schema, zero, 4, 2, 4, 9);
  CHECK(nz.total->value[0] == nz.lx_kl->value[0]);

  TrainingConfig ones;
  ones.lambda_y = ones.lambda_st = ones.lambda_so = ones.lambda_co = 1.0;
  auto po = make_leaves(md);
  auto go = build_batch_graph(po, X, 4, 2, 4);
  auto no = build_losses(po, go, Y, schema, ones, 4, 2, 4, 9);
  const double want = no.lx_kl->value[0] + no.ly_kl->value[0] + no.l_st->value[0] +
                      no.l_so->value[0] + no.l_co->value[0];
  CHECK(no.total->value[0] == Catch::Approx(want).margin(1e-12));
}

TEST_CASE("total loss gradients match finite differences, both modes", "[metaenc]") {
  Rng rng(71);
  const std::size_t m = 4, k = 2, nb = 8;
  auto md = MetaEncoderModel::init(m, k, 2, 13);
  Tensor X = random_matrix(nb, m, rng);
  Tensor Y = Tensor::zeros({nb, 2});
  for (std::size_t i = 0; i < nb; ++i) {
    const double p = rng.uniform(0.1, 0.9);
    Y.at(i, 0) = p;
    Y.at(i, 1) = 1 - p;
  }
  auto schema = geometry::FeatureSchema::all_continuous(m);

  for (auto mode : {StabilityMode::kJacobian, StabilityMode::kPerturbation}) {
    for (std::size_t alpha_eff : {m, std::size_t{2}}) {
      TrainingConfig cfg;
      cfg.lambda_y = cfg.lambda_st = cfg.lambda_so = cfg.lambda_co = 1.0;
      cfg.stability_mode = mode;
      cfg.perturb_dirs = 4;
      auto p = make_leaves(md);
      auto loss = total_loss(p, X, Y, schema, cfg, m, k, alpha_eff, 77);
      auto grads = diff::backward(loss, p.all);
      const double h = 1e-5;
      double worst = 0.0;
      for (std::size_t pi = 0; pi < 6; ++pi) {
        const Tensor& g = grads[pi]->value;
        Rng pick(1000 + pi);
        const std::size_t checks = std::min<std::size_t>(g.size(), 20);
        for (std::size_t c = 0; c < checks; ++c) {
          const std::size_t ei = pick.uniform_index(g.size());
          const double up = fd_loss(md, pi, ei, h, X, Y, schema, cfg, alpha_eff);
          const double dn = fd_loss(md, pi, ei, -h, X, Y, schema, cfg, alpha_eff);
          const double fd = (up - dn) / (2 * h);
          const double denom = std::max({1e-6, std::abs(fd), std::abs(g[ei])});
          worst = std::max(worst, std::abs(g[ei] - fd) / denom);
        }
      }
      CAPTURE(static_cast<int>(mode), alpha_eff);
      CHECK(worst < 1e-4);
    }
  }
}

TEST_CASE("effective alpha schedule", "[metaenc]") {
  TrainingConfig cfg;
  cfg.pretrain_epochs = 2;
  cfg.ramp_epochs = 4;
  CHECK(effective_alpha(0, 10, 2, cfg) == 10);
  CHECK(effective_alpha(1, 10, 2, cfg) == 10);
  CHECK(effective_alpha(2, 10, 2, cfg) == 8);
  CHECK(effective_alpha(3, 10, 2, cfg) == 6);
  CHECK(effective_alpha(4, 10, 2, cfg) == 4);
  CHECK(effective_alpha(5, 10, 2, cfg) == 2);
  CHECK(effective_alpha(9, 10, 2, cfg) == 2);
  // alpha = m: the ramp is a no-op.
  for (std::size_t e = 0; e < 8; ++e) CHECK(effective_alpha(e, 10, 10, cfg) == 10);
}

TEST_CASE("training decreases the loss and is seed-deterministic", "[metaenc]") {
  Rng rng(97);
  const std::size_t n = 64, m = 4;
  Tensor X = Tensor::zeros({n, m});
  for (double& v : X.data()) v = rng.normal();
  Tensor Y = Tensor::zeros({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double s = 1.0 / (1.0 + std::exp(-(X.at(i, 0) - 0.5 * X.at(i, 1))));
    Y.at(i, 0) = 1 - s;
    Y.at(i, 1) = s;
  }
  auto schema = geometry::FeatureSchema::all_continuous(m);

  TrainingConfig cfg;
  cfg.batch_size = 32;
  cfg.validation_fraction = 0.0;
  cfg.pretrain_epochs = 10;
  cfg.ramp_epochs = 0;
  cfg.finetune_epochs = 0;
  cfg.max_epochs = 10;
  cfg.seed = 2024;
  cfg.lambda_so = 1.0;
  cfg.lambda_co = 1.0;
  cfg.record_train_curve = true;

  TrainReport rep;
  auto model = train(X, Y, 2, m, cfg, schema, &rep);
  REQUIRE(rep.epoch_eval_loss.size() == 10);
  for (std::size_t e = 1; e < rep.epoch_eval_loss.size(); ++e)
    CHECK(rep.epoch_eval_loss[e] < rep.epoch_eval_loss[e - 1]);

  auto model2 = train(X, Y, 2, m, cfg, schema, nullptr);
  auto pa = model.params();
  auto pb = model2.params();
  for (std::size_t pi = 0; pi < pa.size(); ++pi)
    for (std::size_t i = 0; i < pa[pi]->size(); ++i)
      CHECK((*pa[pi])[i] == (*pb[pi])[i]);

  CHECK_THROWS_AS(train(Tensor::zeros({0, 0}), Y, 2, m, cfg, schema, nullptr),
                  contract_error);
  CHECK_THROWS_AS(train(X, Tensor::zeros({3, 2}), 2, m, cfg, schema, nullptr),
                  contract_error);
}

TEST_CASE("training respects the sparsity invariant", "[metaenc]") {
  Rng rng(101);
  const std::size_t n = 64, m = 5;
  Tensor X = Tensor::zeros({n, m});
  for (double& v : X.data()) v = rng.normal();
  Tensor Y = Tensor::zeros({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    Y.at(i, 0) = X.at(i, 0) > 0 ? 0.9 : 0.1;
    Y.at(i, 1) = 1 - Y.at(i, 0);
  }
  auto schema = geometry::FeatureSchema::all_continuous(m);
  TrainingConfig cfg;
  cfg.batch_size = 16;
  cfg.validation_fraction = 0.0;
  cfg.pretrain_epochs = 2;
  cfg.ramp_epochs = 3;
  cfg.finetune_epochs = 2;
  cfg.max_epochs = 7;
  cfg.stability_mode = StabilityMode::kPerturbation;
  cfg.perturb_dirs = 2;
  cfg.seed = 5;
  auto model = train(X, Y, 2, 2, cfg, schema, nullptr);
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> x(m);
    for (double& v : x) v = rng.normal();
    Tensor Wsp = sparse_transform(model, x, 2);
    for (std::size_t r = 0; r < 2; ++r) {
      std::size_t nz = 0;
      for (std::size_t j = 0; j < m; ++j)
        if (Wsp.at(j, r) != 0.0) ++nz;
      CHECK(nz <= 2);
    }
  }
}
