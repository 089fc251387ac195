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
#ifndef ILLUME_PIPELINE_HPP
#define ILLUME_PIPELINE_HPP

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include "illume/dataio.hpp"
#include "illume/evalmetrics.hpp"
#include "illume/explain.hpp"
#include "illume/geometry.hpp"
#include "illume/metaenc.hpp"
#include "illume/serialize.hpp"
#include "illume/surrogate.hpp"
#include "illume/synthbench.hpp"

namespace illume::pipeline {

using serialize::json;

// ---------------------------------------------------------------------------
// Trained pipeline = encoder + surrogate + frozen latent store + preprocessing
// ---------------------------------------------------------------------------

struct PipelineModel {
  static constexpr int kFormatVersion = 1;

  metaenc::MetaEncoderModel encoder;
  metaenc::TrainingConfig config;
  explain::SurrogateKind surrogate_kind = explain::SurrogateKind::kLogistic;
  surrogate::LogisticSurrogate logistic;
  surrogate::TreeSurrogate tree;
  dataio::Preprocessor prep;
  int target_class = 1;
  std::size_t n_classes = 2;
  std::uint64_t split_seed = 0;
  Tensor store_X;                // persisted; latents regenerate from these
  std::vector<int> store_labels;
  explain::LatentStore store;    // regenerated on load

  explain::ExplainContext make_context() const {
    explain::ExplainContext ctx;
    ctx.encoder = encoder;
    ctx.alpha = encoder.alpha;
    ctx.surrogate_kind = surrogate_kind;
    ctx.logistic = logistic;
    ctx.tree = tree;
    ctx.store = store;
    ctx.target_class = target_class;
    return ctx;
  }

  void rebuild_store() {
    explain::ExplainContext probe;
    probe.encoder = encoder;
    probe.alpha = encoder.alpha;
    probe.surrogate_kind = surrogate_kind;
    probe.logistic = logistic;
    probe.tree = tree;
    store = explain::build_latent_store(encoder, encoder.alpha, store_X, store_labels,
                                        probe.predictor());
  }
};

inline Tensor encode_rows(const metaenc::MetaEncoderModel& enc, std::size_t alpha,
                          const Tensor& X) {
  Tensor flat = enc.forward_batch(X);
  Tensor Z = Tensor::zeros({X.rows(), enc.k});
  for (std::size_t i = 0; i < X.rows(); ++i) {
    Tensor wi({enc.m, enc.k}, flat.row_values(i));
    wi = metaenc::sparsify_topk(wi, alpha);
    auto z = metaenc::apply_transform(wi, X.row_values(i));
    for (std::size_t r = 0; r < enc.k; ++r) Z.at(i, r) = z[r];
  }
  return Z;
}

struct TrainOptions {
  std::size_t k = 4;
  std::size_t alpha = 0;  // 0 means alpha = m (no sparsity)
  explain::SurrogateKind surrogate_kind = explain::SurrogateKind::kLogistic;
  metaenc::TrainingConfig config;
  std::uint64_t split_seed = 0;
  int target_class = -1;  // -1: class 1 for binary, majority class otherwise
};

/// Trains the encoder on the training split, fits the surrogate on the
/// resulting latents, and freezes the latent store.
inline PipelineModel train_pipeline(const Tensor& X_train, const Tensor& probs_train,
                                    const std::vector<int>& labels_train,
                                    const geometry::FeatureSchema& schema,
                                    const dataio::Preprocessor& prep,
                                    const TrainOptions& opt,
                                    metaenc::TrainReport* report = nullptr) {
  PipelineModel model;
  model.prep = prep;
  model.config = opt.config;
  model.surrogate_kind = opt.surrogate_kind;
  model.split_seed = opt.split_seed;
  model.n_classes = probs_train.cols();

  const std::size_t alpha = opt.alpha == 0 ? X_train.cols() : opt.alpha;
  model.encoder =
      metaenc::train(X_train, probs_train, opt.k, alpha, opt.config, schema, report);
  model.encoder.alpha = alpha;

  Tensor Z = encode_rows(model.encoder, alpha, X_train);
  if (opt.surrogate_kind == explain::SurrogateKind::kLogistic) {
    model.logistic = surrogate::fit_logistic(Z, labels_train, 1e-3);
  } else {
    model.tree = surrogate::fit_tree_tuned(Z, labels_train, {3, 4, 5, 6}, opt.split_seed, 5);
  }

  if (opt.target_class >= 0) {
    model.target_class = opt.target_class;
  } else if (model.n_classes == 2) {
    model.target_class = 1;
  } else {
    std::map<int, std::size_t> counts;
    for (int c : labels_train) counts[c]++;
    int best = labels_train.empty() ? 0 : counts.begin()->first;
    for (const auto& [c, cnt] : counts)
      if (cnt > counts[best]) best = c;
    model.target_class = best;
  }

  model.store_X = X_train;
  model.store_labels = labels_train;
  model.rebuild_store();
  return model;
}

// ---------------------------------------------------------------------------
// Model persistence (versioned JSON document)
// ---------------------------------------------------------------------------

inline json model_to_json(const PipelineModel& m) {
  json j;
  j["format_version"] = PipelineModel::kFormatVersion;
  j["encoder"] = serialize::encoder_to_json(m.encoder);
  j["training_config"] = serialize::training_config_to_json(m.config);
  j["seed"] = m.config.seed;
  j["split_seed"] = m.split_seed;
  j["surrogate"] =
      json{{"kind", m.surrogate_kind == explain::SurrogateKind::kLogistic ? "lr" : "dt"}};
  if (m.surrogate_kind == explain::SurrogateKind::kLogistic)
    j["surrogate"]["logistic"] = serialize::logistic_to_json(m.logistic);
  else
    j["surrogate"]["tree"] = serialize::tree_to_json(m.tree);
  j["preprocessor"] = serialize::preprocessor_to_json(m.prep);
  j["target_class"] = m.target_class;
  j["n_classes"] = m.n_classes;
  j["latent_store"] = json{{"rows", serialize::tensor_to_json(m.store_X)},
                           {"labels", m.store_labels}};
  return j;
}

inline PipelineModel model_from_json(const json& j) {
  if (j.at("format_version").get<int>() != PipelineModel::kFormatVersion)
    throw contract_error("unsupported model format version");
  PipelineModel m;
  m.encoder = serialize::encoder_from_json(j.at("encoder"));
  m.config = serialize::training_config_from_json(j.at("training_config"));
  m.split_seed = j.at("split_seed").get<std::uint64_t>();
  const auto kind = j.at("surrogate").at("kind").get<std::string>();
  m.surrogate_kind =
      kind == "lr" ? explain::SurrogateKind::kLogistic : explain::SurrogateKind::kTree;
  if (m.surrogate_kind == explain::SurrogateKind::kLogistic)
    m.logistic = serialize::logistic_from_json(j.at("surrogate").at("logistic"));
  else
    m.tree = serialize::tree_from_json(j.at("surrogate").at("tree"));
  m.prep = serialize::preprocessor_from_json(j.at("preprocessor"));
  m.target_class = j.at("target_class").get<int>();
  m.n_classes = j.at("n_classes").get<std::size_t>();
  m.store_X = serialize::tensor_from_json(j.at("latent_store").at("rows"));
  m.store_labels = j.at("latent_store").at("labels").get<std::vector<int>>();
  m.rebuild_store();
  return m;
}

// ---------------------------------------------------------------------------
// Explanation runs
// ---------------------------------------------------------------------------

struct ExplainRun {
  std::vector<explain::Explanation> explanations;
  std::vector<json> records;
  double total_ms = 0.0;
  double ms_per_instance = 0.0;
  std::size_t n_failed = 0;
};

inline explain::ExplanationKind parse_kind(const std::string& kind) {
  if (kind == "importance") return explain::ExplanationKind::kImportance;
  if (kind == "rule") return explain::ExplanationKind::kRule;
  if (kind == "counterfactual") return explain::ExplanationKind::kCounterfactual;
  throw contract_error("unknown explanation kind: " + kind);
}

/// Explains every row; per-instance failures are recorded and the run
/// continues. Timing is returned to the caller only (reports stay
/// byte-reproducible).
inline ExplainRun run_explain(const PipelineModel& model, const Tensor& X,
                              const dataio::BlackBoxOutputs& bb,
                              explain::ExplanationKind kind) {
  // Kind/surrogate mismatches are a run-level misuse, not per-instance noise.
  if (kind == explain::ExplanationKind::kImportance &&
      model.surrogate_kind != explain::SurrogateKind::kLogistic)
    throw contract_error("importance explanations need a logistic surrogate (lr)");
  if (kind != explain::ExplanationKind::kImportance &&
      model.surrogate_kind != explain::SurrogateKind::kTree)
    throw contract_error("rule and counterfactual explanations need a tree surrogate (dt)");
  ExplainRun run;
  auto ctx = model.make_context();
  const auto t0 = std::chrono::steady_clock::now();
  const auto names = model.prep.feature_names();
  for (std::size_t i = 0; i < X.rows(); ++i) {
    explain::Explanation e;
    try {
      e = explain::explain_instance(ctx, X.row_values(i), bb.probs.row_values(i), kind, i);
    } catch (const std::exception& ex) {
      e.instance_id = i;
      e.kind = kind;
      e.valid = false;
      e.error = ex.what();
      ++run.n_failed;
    }
    run.records.push_back(serialize::explanation_to_json(e, names));
    run.explanations.push_back(std::move(e));
  }
  const auto t1 = std::chrono::steady_clock::now();
  run.total_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  run.ms_per_instance = X.rows() ? run.total_ms / static_cast<double>(X.rows()) : 0.0;
  return run;
}

// ---------------------------------------------------------------------------
// Metric runs
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::vector<std::string> metrics;  // empty = all applicable
  std::size_t knn_k = 5;
  std::size_t k_max = 20;
  std::size_t n_triplets = 20000;
  std::uint64_t seed = 0;
};

inline bool wants(const EvalOptions& opt, const std::string& name) {
  if (opt.metrics.empty()) return true;
  for (const auto& m : opt.metrics)
    if (m == name) return true;
  return false;
}

/// Computes the requested metrics on the given rows (normally a test split).
inline std::vector<evalmetrics::MetricReport> run_eval(
    const PipelineModel& model, const Tensor& X, const dataio::BlackBoxOutputs& bb,
    const std::vector<int>& gt_labels, bool has_labels, const EvalOptions& opt) {
  using namespace evalmetrics;
  std::vector<MetricReport> reports;
  const std::size_t n = X.rows();
  const auto schema = model.prep.feature_schema();
  Tensor Z = encode_rows(model.encoder, model.encoder.alpha, X);

  auto dist_x_mixed = [&](std::size_t i, std::size_t j) {
    return geometry::input_distance(X.row_values(i), X.row_values(j), schema);
  };
  auto dist_x_l2 = [&](std::size_t i, std::size_t j) {
    return geometry::euclidean_distance(X.row_values(i), X.row_values(j));
  };
  auto dist_z_cos = [&](std::size_t i, std::size_t j) {
    return geometry::cosine_distance(Z.row_values(i), Z.row_values(j));
  };
  auto dist_z_l2 = [&](std::size_t i, std::size_t j) {
    return geometry::euclidean_distance(Z.row_values(i), Z.row_values(j));
  };
  auto dist_b_l2 = [&](std::size_t i, std::size_t j) {
    return geometry::euclidean_distance(bb.probs.row_values(i), bb.probs.row_values(j));
  };

  std::map<std::string, std::string> echo{{"n", std::to_string(n)},
                                          {"k", std::to_string(model.encoder.k)},
                                          {"alpha", std::to_string(model.encoder.alpha)}};

  if (wants(opt, "knn-gain")) {
    if (!has_labels)
      throw contract_error("knn-gain needs ground-truth labels in the dataset");
    auto e = echo;
    e["knn_k"] = std::to_string(opt.knn_k);
    auto r = summarize("knn-gain", {knn_gain(n, dist_x_mixed, dist_z_cos, gt_labels, opt.knn_k)}, e);
    reports.push_back(std::move(r));
  }
  if (wants(opt, "triplet-feature")) {
    auto e = echo;
    e["n_triplets"] = std::to_string(opt.n_triplets);
    reports.push_back(summarize(
        "triplet-feature", {triplet_accuracy(dist_x_l2, dist_z_l2, n, opt.n_triplets, opt.seed)},
        e));
  }
  if (wants(opt, "triplet-decision")) {
    auto e = echo;
    e["n_triplets"] = std::to_string(opt.n_triplets);
    reports.push_back(summarize(
        "triplet-decision", {triplet_accuracy(dist_b_l2, dist_z_l2, n, opt.n_triplets, opt.seed)},
        e));
  }

  const bool need_explanations = wants(opt, "robustness") || wants(opt, "faithfulness") ||
                                 wants(opt, "global-robustness");
  if (need_explanations) {
    const auto kind = model.surrogate_kind == explain::SurrogateKind::kLogistic
                          ? explain::ExplanationKind::kImportance
                          : explain::ExplanationKind::kRule;
    auto run = run_explain(model, X, bb, kind);
    std::vector<char> usable(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      if (!run.explanations[i].error.empty()) usable[i] = 0;
    auto sim = [&](std::size_t i, std::size_t j) {
      if (!usable[i] || !usable[j]) return 0.0;
      if (model.surrogate_kind == explain::SurrogateKind::kLogistic)
        return cs_score(run.explanations[i].psi, run.explanations[j].psi);
      return rule_similarity(*run.explanations[i].rule, *run.explanations[j].rule);
    };
    auto e = echo;
    e["n_failed"] = std::to_string(run.n_failed);
    if (wants(opt, "robustness")) {
      auto rep = robustness_max_sensitivity(n, dist_x_mixed, bb.labels, sim, opt.k_max);
      std::vector<double> vals;
      for (std::size_t i = 0; i < n; ++i)
        if (rep.included[i]) vals.push_back(rep.per_instance[i]);
      auto er = e;
      er["k_max"] = std::to_string(opt.k_max);
      er["n_excluded"] = std::to_string(rep.n_excluded);
      reports.push_back(summarize("robustness", std::move(vals), er));
    }
    if (wants(opt, "faithfulness")) {
      bool degenerate = false;
      const double v = faithfulness(n, sim, bb.probs, &degenerate);
      auto ef = e;
      ef["degenerate"] = degenerate ? "true" : "false";
      reports.push_back(summarize("faithfulness", {v}, ef));
    }
    if (wants(opt, "global-robustness")) {
      bool degenerate = false;
      const double v = global_robustness(n, sim, dist_x_mixed, bb.labels, &degenerate);
      auto eg = e;
      eg["degenerate"] = degenerate ? "true" : "false";
      reports.push_back(summarize("global-robustness", {v}, eg));
    }
  }
  return reports;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark
// ---------------------------------------------------------------------------

struct BenchOptions {
  std::vector<std::string> families{"linear", "rule"};
  std::vector<std::size_t> m_list{4};
  std::size_t n_classifiers = 5;
  std::size_t n_train = 2048;
  std::size_t n_explain = 2048;
  std::size_t k = 2;
  std::size_t alpha_rule = 2;  // sparsity for the tree pipelines
  std::uint64_t seed = 7;
  metaenc::TrainingConfig config;  // lambdas are set per family below
};

struct BenchClassifierResult {
  std::string family;
  std::size_t m = 0;
  std::size_t index = 0;
  double ill_mean = 0.0;  // cs-score (linear) or cplt-score (rule)
  double ill_mad = 0.0;
  double inp_mean = 0.0;
  double inp_mad = 0.0;
  double surrogate_accuracy = 0.0;
  std::size_t n_refined = 0;
  std::size_t n_no_neighbor = 0;
  std::size_t sparsity_violations = 0;
  double explain_ms_per_instance = 0.0;  // console-only
};

struct BenchResult {
  std::vector<BenchClassifierResult> per_classifier;
  std::map<std::string, double> aggregate;  // "<family>/<metric>" -> value
};

namespace detail {

struct Standardizer {
  std::vector<double> mean, std;

  static Standardizer fit(const Tensor& X, std::size_t n_train) {
    Standardizer s;
    const std::size_t m = X.cols();
    s.mean.assign(m, 0.0);
    s.std.assign(m, 1.0);
    for (std::size_t j = 0; j < m; ++j) {
      double mu = 0.0;
      for (std::size_t i = 0; i < n_train; ++i) mu += X.at(i, j);
      mu /= static_cast<double>(n_train);
      double var = 0.0;
      for (std::size_t i = 0; i < n_train; ++i) {
        const double d = X.at(i, j) - mu;
        var += d * d;
      }
      var /= static_cast<double>(n_train);
      s.mean[j] = mu;
      s.std[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Tensor apply(const Tensor& X) const {
    Tensor out = X;
    for (std::size_t i = 0; i < X.rows(); ++i)
      for (std::size_t j = 0; j < X.cols(); ++j)
        out.at(i, j) = (X.at(i, j) - mean[j]) / std[j];
    return out;
  }
};

inline std::size_t column_nonzeros_over(const Tensor& w, std::size_t alpha) {
  std::size_t bad = 0;
  for (std::size_t r = 0; r < w.cols(); ++r) {
    std::size_t nz = 0;
    for (std::size_t j = 0; j < w.rows(); ++j)
      if (w.at(j, r) != 0.0) ++nz;
    if (nz > alpha) ++bad;
  }
  return bad;
}

}  // namespace detail

/// One benchmark cell: a transparent classifier, an ILLUME pipeline, the
/// input-space baseline, and correctness scores on the explained split.
inline BenchClassifierResult bench_one(const std::string& family, std::size_t m,
                                       std::size_t index, const BenchOptions& opt) {
  using namespace synthbench;
  SyntheticConfig scfg = SyntheticConfig::standard(m, opt.seed);
  scfg.n_instances = opt.n_train + opt.n_explain;
  scfg.n_classifiers = opt.n_classifiers;
  Tensor X_raw = gen_dataset(scfg, (family == "linear" ? 1000 : 2000) + index);

  TransparentLinear lin;
  TransparentRuleBased rb;
  const bool is_linear = family == "linear";
  if (is_linear)
    lin = make_linear(scfg, index);
  else
    rb = make_rulebased(scfg, index);
  auto proba = [&](std::span<const double> x) {
    return is_linear ? lin.predict_proba(x) : rb.predict_proba(x);
  };

  const std::size_t n = scfg.n_instances;
  dataio::BlackBoxOutputs bb;
  bb.classes = 2;
  bb.probs = Tensor::zeros({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    auto p = proba(X_raw.row_values(i));
    bb.probs.at(i, 0) = p[0];
    bb.probs.at(i, 1) = p[1];
  }
  bb.derive_labels();

  auto std_fit = detail::Standardizer::fit(X_raw, opt.n_train);
  Tensor X = std_fit.apply(X_raw);

  // Slices.
  auto slice_rows = [&](const Tensor& src, std::size_t from, std::size_t count) {
    Tensor out = Tensor::zeros({count, src.cols()});
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < src.cols(); ++j) out.at(i, j) = src.at(from + i, j);
    return out;
  };
  Tensor X_train = slice_rows(X, 0, opt.n_train);
  Tensor probs_train = slice_rows(bb.probs, 0, opt.n_train);
  std::vector<int> labels_train(bb.labels.begin(),
                                bb.labels.begin() + static_cast<std::ptrdiff_t>(opt.n_train));
  Tensor X_test = slice_rows(X, opt.n_train, opt.n_explain);

  // ILLUME pipeline for this family.
  TrainOptions topt;
  topt.k = opt.k;
  topt.alpha = is_linear ? m : opt.alpha_rule;
  topt.surrogate_kind =
      is_linear ? explain::SurrogateKind::kLogistic : explain::SurrogateKind::kTree;
  topt.config = opt.config;
  topt.config.seed = opt.seed * 131 + index;
  topt.config.lambda_y = 1.0;
  topt.config.lambda_st = 1.0;
  topt.config.lambda_so = is_linear ? 0.0 : 1.0;
  topt.config.lambda_co = is_linear ? 1.0 : 0.0;
  topt.split_seed = opt.seed;

  dataio::Preprocessor prep;  // identity naming for synthetic features
  for (std::size_t j = 0; j < m; ++j) {
    dataio::ColumnSpec spec;
    spec.name = "x" + std::to_string(j);
    spec.kind = dataio::ColumnKind::kContinuous;
    prep.raw_order.push_back(spec);
    dataio::Preprocessor::ContColumn c;
    c.name = spec.name;
    c.mean = std_fit.mean[j];
    c.std = std_fit.std[j];
    prep.cont.push_back(c);
  }
  auto schema = geometry::FeatureSchema::all_continuous(m);
  PipelineModel model =
      train_pipeline(X_train, probs_train, labels_train, schema, prep, topt);

  // Input-space baselines on the standardized training rows.
  surrogate::LogisticSurrogate inp_lr;
  surrogate::TreeSurrogate inp_dt;
  if (is_linear)
    inp_lr = surrogate::fit_logistic(X_train, labels_train, 1e-3);
  else
    inp_dt = surrogate::fit_tree_tuned(X_train, labels_train, {3, 4, 5, 6}, opt.seed, 5);

  // Explain the held-out instances and score against the ground truth.
  dataio::BlackBoxOutputs bb_test;
  bb_test.classes = 2;
  bb_test.probs = slice_rows(bb.probs, opt.n_train, opt.n_explain);
  bb_test.derive_labels();
  auto run = run_explain(model, X_test, bb_test,
                         is_linear ? explain::ExplanationKind::kImportance
                                   : explain::ExplanationKind::kRule);

  BenchClassifierResult res;
  res.family = family;
  res.m = m;
  res.index = index;
  res.explain_ms_per_instance = run.ms_per_instance;

  std::vector<double> ill_scores, inp_scores;
  auto ctx = model.make_context();
  std::size_t sur_hits = 0;
  for (std::size_t i = 0; i < opt.n_explain; ++i) {
    auto x = X_test.row_values(i);
    const auto& e = run.explanations[i];
    if (!e.error.empty()) {
      ++res.n_no_neighbor;
      continue;
    }
    if (e.refinement) ++res.n_refined;

    // Effective transformation sparsity (end to end).
    Tensor w_eff = metaenc::sparse_transform(model.encoder, x, model.encoder.alpha);
    if (e.refinement) {
      // Recompute the refined transform the same way explain did.
      auto z = metaenc::apply_transform(w_eff, x);
      auto ref = explain::refine_fidelity(x, z, w_eff, ctx.predictor(), e.label, ctx.store,
                                          model.encoder.alpha, ctx.refine_grid);
      w_eff = ref.w_star;
    }
    res.sparsity_violations += detail::column_nonzeros_over(w_eff, topt.alpha);

    auto zi = metaenc::apply_transform(
        metaenc::sparse_transform(model.encoder, x, model.encoder.alpha), x);
    sur_hits += ctx.predict_label(zi) == bb_test.labels[i] ? 1 : 0;

    if (is_linear) {
      // Ground truth mapped into standardized coordinates.
      std::vector<double> gt = gt_importance(lin);
      for (std::size_t j = 0; j < m; ++j) gt[j] *= std_fit.std[j];
      ill_scores.push_back(evalmetrics::cs_score(e.psi, gt));
      std::vector<double> inp_psi(m);
      for (std::size_t j = 0; j < m; ++j)
        inp_psi[j] = inp_lr.coefs[0][j] * X_test.at(i, j);
      inp_scores.push_back(evalmetrics::cs_score(inp_psi, gt));
    } else {
      auto gt = gt_rule(rb, X_raw.row_values(opt.n_train + i));
      explain::AxisRule gt_std;
      gt_std.label = gt.label;
      gt_std.lower.resize(m);
      gt_std.upper.resize(m);
      for (std::size_t j = 0; j < m; ++j) {
        gt_std.lower[j] = std::isfinite(gt.lower[j])
                              ? (gt.lower[j] - std_fit.mean[j]) / std_fit.std[j]
                              : gt.lower[j];
        gt_std.upper[j] = std::isfinite(gt.upper[j])
                              ? (gt.upper[j] - std_fit.mean[j]) / std_fit.std[j]
                              : gt.upper[j];
      }
      ill_scores.push_back(evalmetrics::cplt_score(*e.rule, gt_std));
      // Baseline: the input-space tree's own leaf box.
      auto leaf = inp_dt.leaf_index(x);
      auto lrule = surrogate::leaf_rule(inp_dt, leaf);
      explain::AxisRule inp_rule;
      inp_rule.lower = lrule.lower;
      inp_rule.upper = lrule.upper;
      inp_rule.label = lrule.label;
      inp_scores.push_back(evalmetrics::cplt_score(inp_rule, gt_std));
    }
  }

  auto ill_sum = evalmetrics::summarize("ill", std::move(ill_scores));
  auto inp_sum = evalmetrics::summarize("inp", std::move(inp_scores));
  res.ill_mean = ill_sum.mean;
  res.ill_mad = ill_sum.mad;
  res.inp_mean = inp_sum.mean;
  res.inp_mad = inp_sum.mad;
  res.surrogate_accuracy =
      static_cast<double>(sur_hits) / static_cast<double>(opt.n_explain);
  return res;
}

inline BenchResult run_bench(const BenchOptions& opt) {
  BenchResult out;
  for (const auto& family : opt.families)
    for (std::size_t m : opt.m_list)
      for (std::size_t idx = 0; idx < opt.n_classifiers; ++idx)
        out.per_classifier.push_back(bench_one(family, m, idx, opt));
  for (const auto& family : opt.families) {
    std::vector<double> ill, inp;
    for (const auto& r : out.per_classifier)
      if (r.family == family) {
        ill.push_back(r.ill_mean);
        inp.push_back(r.inp_mean);
      }
    if (ill.empty()) continue;
    auto is = evalmetrics::summarize("i", ill);
    auto ps = evalmetrics::summarize("p", inp);
    out.aggregate[family + "/ill_mean"] = is.mean;
    out.aggregate[family + "/ill_mad"] = is.mad;
    out.aggregate[family + "/inp_mean"] = ps.mean;
    out.aggregate[family + "/inp_mad"] = ps.mad;
  }
  return out;
}

inline json bench_result_to_json(const BenchResult& r) {
  json per = json::array();
  for (const auto& c : r.per_classifier)
    per.push_back(json{{"family", c.family},
                       {"m", c.m},
                       {"classifier_index", c.index},
                       {"ill_mean", c.ill_mean},
                       {"ill_mad", c.ill_mad},
                       {"inp_mean", c.inp_mean},
                       {"inp_mad", c.inp_mad},
                       {"surrogate_accuracy", c.surrogate_accuracy},
                       {"n_refined", c.n_refined},
                       {"n_no_neighbor", c.n_no_neighbor},
                       {"sparsity_violations", c.sparsity_violations}});
  return json{{"per_classifier", per}, {"aggregate", r.aggregate}};
}

// ---------------------------------------------------------------------------
// Synthetic manifest adapter
// ---------------------------------------------------------------------------

/// Regenerates the named transparent classifier and applies it to raw
/// (unstandardized) continuous rows.
inline dataio::BlackBoxOutputs blackbox_from_manifest(const serialize::SyntheticManifest& mf,
                                                      const Tensor& raw_rows) {
  if (raw_rows.cols() != mf.m)
    throw contract_error("synthetic manifest feature count does not match the dataset");
  synthbench::SyntheticConfig scfg;
  scfg.t = mf.t;
  scfg.u = mf.u;
  scfg.seed = mf.seed;
  scfg.n_classifiers = mf.classifier_index + 1;
  dataio::BlackBoxOutputs bb;
  bb.classes = 2;
  bb.probs = Tensor::zeros({raw_rows.rows(), 2});
  if (mf.family == "linear") {
    auto clf = synthbench::make_linear(scfg, mf.classifier_index);
    for (std::size_t i = 0; i < raw_rows.rows(); ++i) {
      auto p = clf.predict_proba(raw_rows.row_values(i));
      bb.probs.at(i, 0) = p[0];
      bb.probs.at(i, 1) = p[1];
    }
  } else {
    auto clf = synthbench::make_rulebased(scfg, mf.classifier_index);
    for (std::size_t i = 0; i < raw_rows.rows(); ++i) {
      auto p = clf.predict_proba(raw_rows.row_values(i));
      bb.probs.at(i, 0) = p[0];
      bb.probs.at(i, 1) = p[1];
    }
  }
  bb.derive_labels();
  return bb;
}

}  // namespace illume::pipeline

#endif  // ILLUME_PIPELINE_HPP
