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
#ifndef ILLUME_SERIALIZE_HPP
#define ILLUME_SERIALIZE_HPP

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "illume/dataio.hpp"
#include "illume/evalmetrics.hpp"
#include "illume/explain.hpp"
#include "illume/metaenc.hpp"
#include "illume/surrogate.hpp"
#include "illume/synthbench.hpp"

namespace illume::serialize {

using json = nlohmann::json;

inline json bound_to_json(double v) {
  if (v == kInf) return json("inf");
  if (v == -kInf) return json("-inf");
  return json(v);
}

inline double bound_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw contract_error("unknown bound sentinel: " + s);
  }
  return j.get<double>();
}

// ---------------------------------------------------------------------------
// Tensors and model pieces
// ---------------------------------------------------------------------------

inline json tensor_to_json(const Tensor& t) {
  return json{{"shape", t.shape()}, {"data", t.data()}};
}

inline Tensor tensor_from_json(const json& j) {
  return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                j.at("data").get<std::vector<double>>());
}

inline json training_config_to_json(const metaenc::TrainingConfig& c) {
  return json{
      {"lambda_y", c.lambda_y},
      {"lambda_st", c.lambda_st},
      {"lambda_so", c.lambda_so},
      {"lambda_co", c.lambda_co},
      {"learning_rate", c.learning_rate},
      {"batch_size", c.batch_size},
      {"max_epochs", c.max_epochs},
      {"pretrain_epochs", c.pretrain_epochs},
      {"ramp_epochs", c.ramp_epochs},
      {"finetune_epochs", c.finetune_epochs},
      {"early_stopping_patience", c.early_stopping_patience},
      {"validation_fraction", c.validation_fraction},
      {"stability_mode",
       c.stability_mode == metaenc::StabilityMode::kJacobian ? "jacobian" : "perturbation"},
      {"perturb_dirs", c.perturb_dirs},
      {"perturb_norm", c.perturb_norm},
      {"seed", c.seed},
  };
}

inline metaenc::TrainingConfig training_config_from_json(const json& j) {
  metaenc::TrainingConfig c;
  c.lambda_y = j.at("lambda_y").get<double>();
  c.lambda_st = j.at("lambda_st").get<double>();
  c.lambda_so = j.at("lambda_so").get<double>();
  c.lambda_co = j.at("lambda_co").get<double>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
  c.ramp_epochs = j.at("ramp_epochs").get<std::size_t>();
  c.finetune_epochs = j.at("finetune_epochs").get<std::size_t>();
  c.early_stopping_patience = j.at("early_stopping_patience").get<std::size_t>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.stability_mode = j.at("stability_mode").get<std::string>() == "jacobian"
                         ? metaenc::StabilityMode::kJacobian
                         : metaenc::StabilityMode::kPerturbation;
  c.perturb_dirs = j.at("perturb_dirs").get<std::size_t>();
  c.perturb_norm = j.at("perturb_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline json encoder_to_json(const metaenc::MetaEncoderModel& m) {
  return json{
      {"m", m.m},
      {"k", m.k},
      {"alpha", m.alpha},
      {"layer_dims", m.layer_dims()},
      {"weights",
       {{"w1", m.w1.data()},
        {"b1", m.b1.data()},
        {"w2", m.w2.data()},
        {"b2", m.b2.data()},
        {"w3", m.w3.data()},
        {"b3", m.b3.data()}}},
  };
}

inline metaenc::MetaEncoderModel encoder_from_json(const json& j) {
  metaenc::MetaEncoderModel m;
  m.m = j.at("m").get<std::size_t>();
  m.k = j.at("k").get<std::size_t>();
  m.alpha = j.at("alpha").get<std::size_t>();
  const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  if (dims.size() != 4) throw contract_error("encoder: expected 4 layer dims");
  const auto& w = j.at("weights");
  auto load = [&](const char* key, std::size_t r, std::size_t c) {
    auto v = w.at(key).get<std::vector<double>>();
    if (v.size() != r * c) throw contract_error("encoder: weight size mismatch");
    return Tensor({r, c}, std::move(v));
  };
  m.w1 = load("w1", dims[0], dims[1]);
  m.b1 = load("b1", 1, dims[1]);
  m.w2 = load("w2", dims[1], dims[2]);
  m.b2 = load("b2", 1, dims[2]);
  m.w3 = load("w3", dims[2], dims[3]);
  m.b3 = load("b3", 1, dims[3]);
  return m;
}

inline json logistic_to_json(const surrogate::LogisticSurrogate& s) {
  return json{{"k", s.k},
              {"classes", s.classes},
              {"intercepts", s.intercepts},
              {"coefs", s.coefs}};
}

inline surrogate::LogisticSurrogate logistic_from_json(const json& j) {
  surrogate::LogisticSurrogate s;
  s.k = j.at("k").get<std::size_t>();
  s.classes = j.at("classes").get<std::size_t>();
  s.intercepts = j.at("intercepts").get<std::vector<double>>();
  s.coefs = j.at("coefs").get<std::vector<std::vector<double>>>();
  return s;
}

inline json tree_to_json(const surrogate::TreeSurrogate& t) {
  json nodes = json::array();
  for (const auto& nd : t.nodes)
    nodes.push_back(json{{"leaf", nd.is_leaf},
                         {"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"label", nd.label},
                         {"histogram", nd.histogram}});
  return json{{"k", t.k},
              {"classes", t.classes},
              {"max_depth", t.max_depth},
              {"min_leaf", t.min_leaf},
              {"nodes", nodes}};
}

inline surrogate::TreeSurrogate tree_from_json(const json& j) {
  surrogate::TreeSurrogate t;
  t.k = j.at("k").get<std::size_t>();
  t.classes = j.at("classes").get<std::size_t>();
  t.max_depth = j.at("max_depth").get<std::size_t>();
  t.min_leaf = j.at("min_leaf").get<std::size_t>();
  for (const auto& nj : j.at("nodes")) {
    surrogate::TreeSurrogate::TreeNode nd;
    nd.is_leaf = nj.at("leaf").get<bool>();
    nd.feature = nj.at("feature").get<std::size_t>();
    nd.threshold = nj.at("threshold").get<double>();
    nd.left = nj.at("left").get<int>();
    nd.right = nj.at("right").get<int>();
    nd.label = nj.at("label").get<int>();
    nd.histogram = nj.at("histogram").get<std::vector<std::size_t>>();
    t.nodes.push_back(std::move(nd));
  }
  return t;
}

inline json preprocessor_to_json(const dataio::Preprocessor& p) {
  json raw = json::array();
  for (const auto& spec : p.raw_order)
    raw.push_back(json{
        {"name", spec.name},
        {"kind", spec.kind == dataio::ColumnKind::kContinuous ? "continuous" : "categorical"}});
  json cont = json::array();
  for (const auto& c : p.cont)
    cont.push_back(json{{"name", c.name}, {"mean", c.mean}, {"std", c.std}});
  json cat = json::array();
  for (const auto& c : p.cat)
    cat.push_back(json{{"name", c.name}, {"categories", c.categories}});
  return json{{"raw_order", raw}, {"continuous", cont}, {"categorical", cat}};
}

inline dataio::Preprocessor preprocessor_from_json(const json& j) {
  dataio::Preprocessor p;
  for (const auto& rj : j.at("raw_order")) {
    dataio::ColumnSpec spec;
    spec.name = rj.at("name").get<std::string>();
    spec.kind = rj.at("kind").get<std::string>() == "continuous"
                    ? dataio::ColumnKind::kContinuous
                    : dataio::ColumnKind::kCategorical;
    p.raw_order.push_back(spec);
  }
  for (const auto& cj : j.at("continuous")) {
    dataio::Preprocessor::ContColumn c;
    c.name = cj.at("name").get<std::string>();
    c.mean = cj.at("mean").get<double>();
    c.std = cj.at("std").get<double>();
    p.cont.push_back(c);
  }
  for (const auto& cj : j.at("categorical")) {
    dataio::Preprocessor::CatColumn c;
    c.name = cj.at("name").get<std::string>();
    c.categories = cj.at("categories").get<std::vector<std::string>>();
    p.cat.push_back(c);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Explanations (JSON lines)
// ---------------------------------------------------------------------------

inline json axis_rule_to_json(const explain::AxisRule& r,
                              const std::vector<std::string>& names) {
  json bounds = json::array();
  for (std::size_t j = 0; j < r.lower.size(); ++j)
    bounds.push_back(json{{"feature", names.empty() ? std::to_string(j) : names[j]},
                          {"lower", bound_to_json(r.lower[j])},
                          {"upper", bound_to_json(r.upper[j])}});
  return json{{"bounds", bounds}, {"label", r.label}};
}

inline explain::AxisRule axis_rule_from_json(const json& j) {
  explain::AxisRule r;
  for (const auto& bj : j.at("bounds")) {
    r.lower.push_back(bound_from_json(bj.at("lower")));
    r.upper.push_back(bound_from_json(bj.at("upper")));
  }
  r.label = j.at("label").get<int>();
  return r;
}

inline json explanation_to_json(const explain::Explanation& e,
                                const std::vector<std::string>& feature_names) {
  json j{{"instance_id", e.instance_id},
         {"kind", e.kind == explain::ExplanationKind::kImportance
                      ? "importance"
                      : e.kind == explain::ExplanationKind::kRule ? "rule" : "counterfactual"},
         {"class", e.label},
         {"valid", e.valid}};
  j["refinement"] = e.refinement ? json{{"gamma_w", e.refinement->first},
                                        {"gamma_x", e.refinement->second}}
                                 : json(nullptr);
  if (!e.psi.empty()) j["psi"] = e.psi;
  if (e.rule) j["rule"] = axis_rule_to_json(*e.rule, feature_names);
  if (e.counterfactual)
    j["counterfactual"] = json{{"rule", axis_rule_to_json(e.counterfactual->rule, feature_names)},
                               {"example_row", e.counterfactual->example_row},
                               {"n_changes", e.counterfactual->n_changes}};
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

inline void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path);
  if (!out) throw contract_error("cannot write file: " + path);
  for (const auto& r : records) out << r.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Reports and manifests
// ---------------------------------------------------------------------------

inline json metric_report_to_json(const evalmetrics::MetricReport& r) {
  return json{{"metric", r.metric},
              {"config", r.config},
              {"per_instance", r.per_instance},
              {"mean", r.mean},
              {"mad", r.mad}};
}

struct SyntheticManifest {
  std::string family;  // "linear" | "rule"
  std::size_t m = 4;
  std::size_t t = 4;
  std::size_t u = 0;
  std::uint64_t seed = 0;
  std::size_t classifier_index = 0;
};

inline SyntheticManifest manifest_from_json(const json& j) {
  SyntheticManifest mf;
  mf.family = j.at("family").get<std::string>();
  if (mf.family != "linear" && mf.family != "rule")
    throw contract_error("manifest family must be 'linear' or 'rule'");
  mf.m = j.at("m").get<std::size_t>();
  mf.t = j.contains("t") ? j.at("t").get<std::size_t>() : std::min<std::size_t>(16, mf.m);
  mf.u = mf.m - mf.t;
  mf.seed = j.at("seed").get<std::uint64_t>();
  mf.classifier_index =
      j.contains("classifier_index") ? j.at("classifier_index").get<std::size_t>() : 0;
  return mf;
}

inline json manifest_to_json(const SyntheticManifest& mf) {
  return json{{"family", mf.family}, {"m", mf.m},       {"t", mf.t},
              {"u", mf.u},           {"seed", mf.seed}, {"classifier_index", mf.classifier_index}};
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("cannot open JSON file: " + path);
  json j;
  in >> j;
  return j;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw contract_error("cannot write file: " + path);
  out << j.dump(2) << "\n";
}

inline dataio::DataSchema schema_from_json(const json& j) {
  dataio::DataSchema s;
  for (const auto& cj : j.at("columns")) {
    dataio::ColumnSpec spec;
    spec.name = cj.at("name").get<std::string>();
    const auto kind = cj.at("kind").get<std::string>();
    if (kind == "continuous")
      spec.kind = dataio::ColumnKind::kContinuous;
    else if (kind == "categorical")
      spec.kind = dataio::ColumnKind::kCategorical;
    else if (kind == "label")
      spec.kind = dataio::ColumnKind::kLabel;
    else
      throw contract_error("unknown column kind: " + kind);
    s.columns.push_back(spec);
  }
  return s;
}

}  // namespace illume::serialize

#endif  // ILLUME_SERIALIZE_HPP
