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
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "illume/illume.hpp"

namespace {

using namespace illume;
using serialize::json;

struct CommonArgs {
  std::string data, schema, preds, synthetic_manifest, model, out;
  std::uint64_t seed = 0, split_seed = 0;
};

dataio::Dataset load_named_dataset(const CommonArgs& args) {
  auto table = dataio::read_csv(args.data);
  auto schema = serialize::schema_from_json(serialize::load_json_file(args.schema));
  auto ds = dataio::load_dataset(table, schema, args.split_seed);
  if (ds.unseen_category_count > 0)
    std::cerr << "warning: " << ds.unseen_category_count
              << " unseen categorical values mapped to all-zero groups\n";
  return ds;
}

dataio::BlackBoxOutputs load_outputs(const CommonArgs& args, const dataio::Dataset& ds) {
  if (!args.preds.empty()) {
    return dataio::load_predictions_csv(dataio::read_csv(args.preds), ds.rows());
  }
  if (!args.synthetic_manifest.empty()) {
    auto mf = serialize::manifest_from_json(serialize::load_json_file(args.synthetic_manifest));
    return pipeline::blackbox_from_manifest(mf, ds.X_raw_continuous);
  }
  throw contract_error("provide either --preds or --synthetic-manifest");
}

int cmd_train(const CommonArgs& args, const pipeline::TrainOptions& opt_in,
              const std::string& surrogate_name) {
  auto ds = load_named_dataset(args);
  auto bb = load_outputs(args, ds);

  pipeline::TrainOptions opt = opt_in;
  opt.surrogate_kind = surrogate_name == "dt" ? explain::SurrogateKind::kTree
                                              : explain::SurrogateKind::kLogistic;
  opt.split_seed = args.split_seed;
  opt.config.seed = args.seed;

  Tensor X_train = ds.slice(ds.train_rows);
  Tensor probs_train = Tensor::zeros({ds.train_rows.size(), bb.probs.cols()});
  std::vector<int> labels_train(ds.train_rows.size());
  for (std::size_t i = 0; i < ds.train_rows.size(); ++i) {
    for (std::size_t c = 0; c < bb.probs.cols(); ++c)
      probs_train.at(i, c) = bb.probs.at(ds.train_rows[i], c);
    labels_train[i] = bb.labels[ds.train_rows[i]];
  }

  auto model = pipeline::train_pipeline(X_train, probs_train, labels_train, ds.schema,
                                        ds.prep, opt);
  serialize::write_json_file(args.model, pipeline::model_to_json(model));
  std::cerr << "trained meta-encoder (m=" << model.encoder.m << ", k=" << model.encoder.k
            << ", alpha=" << model.encoder.alpha << ") on " << ds.train_rows.size()
            << " rows; model written to " << args.model << "\n";
  return 0;
}

int cmd_explain(const CommonArgs& args, const std::string& kind) {
  auto model = pipeline::model_from_json(serialize::load_json_file(args.model));
  auto table = dataio::read_csv(args.data);

  // Transform the instances with the model's frozen preprocessing.
  std::vector<std::size_t> cells;
  for (const auto& spec : model.prep.raw_order) {
    bool found = false;
    for (std::size_t j = 0; j < table.header.size(); ++j)
      if (table.header[j] == spec.name) {
        cells.push_back(j);
        found = true;
      }
    if (!found) throw contract_error("instance CSV misses column: " + spec.name);
  }
  const std::size_t n = table.rows.size();
  const std::size_t mfeat = model.prep.feature_count();
  Tensor X = Tensor::zeros({n, mfeat});
  Tensor X_raw = Tensor::zeros({n, model.prep.cont.size()});
  std::size_t unseen = 0;
  std::vector<std::string> row(cells.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < cells.size(); ++f) row[f] = table.rows[i][cells[f]];
    auto x = model.prep.transform(row, &unseen);
    for (std::size_t j = 0; j < mfeat; ++j) X.at(i, j) = x[j];
    auto raw = model.prep.raw_continuous(row);
    for (std::size_t j = 0; j < raw.size(); ++j) X_raw.at(i, j) = raw[j];
  }
  if (unseen > 0)
    std::cerr << "warning: " << unseen << " unseen categorical values in instances\n";

  dataio::BlackBoxOutputs bb;
  if (!args.preds.empty()) {
    bb = dataio::load_predictions_csv(dataio::read_csv(args.preds), n);
  } else if (!args.synthetic_manifest.empty()) {
    auto mf = serialize::manifest_from_json(serialize::load_json_file(args.synthetic_manifest));
    bb = pipeline::blackbox_from_manifest(mf, X_raw);
  } else {
    throw contract_error("provide either --preds or --synthetic-manifest");
  }

  auto run = pipeline::run_explain(model, X, bb, pipeline::parse_kind(kind));
  serialize::write_jsonl(args.out, run.records);
  std::cerr << "explained " << n << " instances in " << run.total_ms << " ms ("
            << run.ms_per_instance << " ms/instance), " << run.n_failed
            << " failures recorded; report written to " << args.out << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& args, const std::vector<std::string>& metrics,
             std::size_t k_max, std::size_t n_triplets) {
  auto model = pipeline::model_from_json(serialize::load_json_file(args.model));
  auto ds = load_named_dataset(args);
  auto bb = load_outputs(args, ds);

  // Metrics run on the held-out split.
  Tensor X_test = ds.slice(ds.test_rows);
  dataio::BlackBoxOutputs bb_test;
  bb_test.classes = bb.classes;
  bb_test.probs = Tensor::zeros({ds.test_rows.size(), bb.probs.cols()});
  std::vector<int> gt_labels(ds.test_rows.size(), 0);
  for (std::size_t i = 0; i < ds.test_rows.size(); ++i) {
    for (std::size_t c = 0; c < bb.probs.cols(); ++c)
      bb_test.probs.at(i, c) = bb.probs.at(ds.test_rows[i], c);
    if (ds.has_labels) gt_labels[i] = ds.labels[ds.test_rows[i]];
  }
  bb_test.derive_labels();

  pipeline::EvalOptions opt;
  opt.metrics = metrics;
  opt.k_max = k_max;
  opt.n_triplets = n_triplets;
  opt.seed = args.seed;
  auto reports = pipeline::run_eval(model, X_test, bb_test, gt_labels, ds.has_labels, opt);
  json out = json::array();
  for (const auto& r : reports) out.push_back(serialize::metric_report_to_json(r));
  serialize::write_json_file(args.out, out);
  for (const auto& r : reports)
    std::cerr << r.metric << ": mean=" << r.mean << " mad=" << r.mad << "\n";
  return 0;
}

int cmd_bench(const CommonArgs& args, pipeline::BenchOptions opt) {
  opt.seed = args.seed;
  auto result = pipeline::run_bench(opt);
  serialize::write_json_file(args.out, pipeline::bench_result_to_json(result));
  for (const auto& r : result.per_classifier)
    std::cerr << r.family << " m=" << r.m << " #" << r.index << ": ill=" << r.ill_mean
              << " inp=" << r.inp_mean << " (surrogate acc " << r.surrogate_accuracy
              << ", " << r.explain_ms_per_instance << " ms/instance)\n";
  for (const auto& [key, v] : result.aggregate) std::cerr << key << " = " << v << "\n";
  std::cerr << "benchmark report written to " << args.out << "\n";
  return 0;
}

int cmd_inspect(const CommonArgs& args) {
  auto j = serialize::load_json_file(args.model);
  auto model = pipeline::model_from_json(j);
  std::cout << "format_version: " << j.at("format_version").get<int>() << "\n"
            << "m: " << model.encoder.m << "\n"
            << "k: " << model.encoder.k << "\n"
            << "alpha: " << model.encoder.alpha << "\n"
            << "surrogate: "
            << (model.surrogate_kind == explain::SurrogateKind::kLogistic ? "lr" : "dt")
            << "\n"
            << "target_class: " << model.target_class << "\n"
            << "classes: " << model.n_classes << "\n"
            << "latent_store_rows: " << model.store.size() << "\n"
            << "seed: " << model.config.seed << "\n"
            << "split_seed: " << model.split_seed << "\n";
  std::size_t agree = 0;
  for (char a : model.store.agree) agree += a ? 1 : 0;
  std::cout << "store_surrogate_agreement: "
            << (model.store.size()
                    ? static_cast<double>(agree) / static_cast<double>(model.store.size())
                    : 0.0)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally linear meta-encoded explanations for tabular classifiers"};
  app.require_subcommand(1);

  CommonArgs args;
  pipeline::TrainOptions topt;
  pipeline::BenchOptions bopt;
  std::string surrogate_name = "lr";
  std::string kind = "importance";
  std::string stability_mode = "jacobian";
  std::vector<std::string> metrics;
  std::size_t k_max = 20, n_triplets = 20000;
  int target_class = -1;

  auto add_common_train_flags = [&](CLI::App* c) {
    c->add_option("--k", topt.k, "latent dimension");
    c->add_option("--alpha", topt.alpha, "sparsity level (0 = dense)");
    c->add_option("--lambda-y", topt.config.lambda_y, "decision-conditioning weight");
    c->add_option("--lambda-st", topt.config.lambda_st, "stability weight");
    c->add_option("--lambda-so", topt.config.lambda_so, "soft-orthogonality weight");
    c->add_option("--lambda-co", topt.config.lambda_co, "non-collinearity weight");
    c->add_option("--stability-mode", stability_mode, "jacobian|perturbation")
        ->check(CLI::IsMember({"jacobian", "perturbation"}));
    c->add_option("--batch-size", topt.config.batch_size, "mini-batch size");
    c->add_option("--max-epochs", topt.config.max_epochs, "total epoch cap");
    c->add_option("--pretrain-epochs", topt.config.pretrain_epochs, "dense pretraining epochs");
    c->add_option("--ramp-epochs", topt.config.ramp_epochs, "sparsity ramp epochs");
    c->add_option("--finetune-epochs", topt.config.finetune_epochs, "finetuning epoch cap");
    c->add_option("--patience", topt.config.early_stopping_patience, "early-stopping patience");
    c->add_option("--learning-rate", topt.config.learning_rate, "Adam learning rate");
  };

  auto* train = app.add_subcommand("train", "train a pipeline and write the model file");
  train->add_option("--data", args.data, "dataset CSV")->required();
  train->add_option("--schema", args.schema, "schema JSON")->required();
  train->add_option("--preds", args.preds, "black-box predictions CSV");
  train->add_option("--synthetic-manifest", args.synthetic_manifest, "synthetic black-box manifest");
  train->add_option("--surrogate", surrogate_name, "lr|dt")
      ->check(CLI::IsMember({"lr", "dt"}));
  train->add_option("--model", args.model, "output model JSON")->required();
  train->add_option("--seed", args.seed, "training seed");
  train->add_option("--split-seed", args.split_seed, "train/test split seed");
  train->add_option("--target-class", target_class, "explained class (default: 1 or majority)");
  add_common_train_flags(train);

  auto* explain_cmd = app.add_subcommand("explain", "explain instances with a trained model");
  explain_cmd->add_option("--model", args.model, "model JSON")->required();
  explain_cmd->add_option("--data", args.data, "instances CSV")->required();
  explain_cmd->add_option("--preds", args.preds, "black-box predictions CSV");
  explain_cmd->add_option("--synthetic-manifest", args.synthetic_manifest,
                          "synthetic black-box manifest");
  explain_cmd->add_option("--kind", kind, "importance|rule|counterfactual")
      ->check(CLI::IsMember({"importance", "rule", "counterfactual"}));
  explain_cmd->add_option("--out", args.out, "output JSON-lines report")->required();

  auto* eval_cmd = app.add_subcommand("eval", "compute latent-quality and explanation metrics");
  eval_cmd->add_option("--model", args.model, "model JSON")->required();
  eval_cmd->add_option("--data", args.data, "dataset CSV")->required();
  eval_cmd->add_option("--schema", args.schema, "schema JSON")->required();
  eval_cmd->add_option("--preds", args.preds, "black-box predictions CSV");
  eval_cmd->add_option("--synthetic-manifest", args.synthetic_manifest,
                       "synthetic black-box manifest");
  eval_cmd->add_option("--metric", metrics,
                       "metrics to compute (default: all applicable)");
  eval_cmd->add_option("--k-max", k_max, "robustness neighborhood cap");
  eval_cmd->add_option("--n-triplets", n_triplets, "triplet sample size");
  eval_cmd->add_option("--seed", args.seed, "sampling seed");
  eval_cmd->add_option("--split-seed", args.split_seed, "train/test split seed");
  eval_cmd->add_option("--out", args.out, "output report JSON")->required();

  auto* bench = app.add_subcommand("bench", "run the transparent-classifier benchmark");
  bench->add_option("--families", bopt.families, "linear and/or rule");
  bench->add_option("--m-list", bopt.m_list, "feature counts");
  bench->add_option("--n-classifiers", bopt.n_classifiers, "classifiers per family");
  bench->add_option("--n-train", bopt.n_train, "training rows per classifier");
  bench->add_option("--n-explain", bopt.n_explain, "explained rows per classifier");
  bench->add_option("--k", bopt.k, "latent dimension");
  bench->add_option("--alpha", bopt.alpha_rule, "sparsity for the rule pipelines");
  bench->add_option("--seed", args.seed, "benchmark seed");
  bench->add_option("--batch-size", bopt.config.batch_size, "mini-batch size");
  bench->add_option("--pretrain-epochs", bopt.config.pretrain_epochs, "dense pretraining epochs");
  bench->add_option("--ramp-epochs", bopt.config.ramp_epochs, "sparsity ramp epochs");
  bench->add_option("--finetune-epochs", bopt.config.finetune_epochs, "finetuning epoch cap");
  bench->add_option("--patience", bopt.config.early_stopping_patience, "early-stopping patience");
  bench->add_option("--out", args.out, "output report JSON")->required();

  auto* inspect = app.add_subcommand("inspect", "print a model file summary");
  inspect->add_option("--model", args.model, "model JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    topt.config.stability_mode = stability_mode == "perturbation"
                                     ? metaenc::StabilityMode::kPerturbation
                                     : metaenc::StabilityMode::kJacobian;
    topt.target_class = target_class;
    if (train->parsed()) return cmd_train(args, topt, surrogate_name);
    if (explain_cmd->parsed()) return cmd_explain(args, kind);
    if (eval_cmd->parsed()) return cmd_eval(args, metrics, k_max, n_triplets);
    if (bench->parsed()) return cmd_bench(args, bopt);
    if (inspect->parsed()) return cmd_inspect(args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
