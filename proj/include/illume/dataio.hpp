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
#ifndef ILLUME_DATAIO_HPP
#define ILLUME_DATAIO_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "illume/common.hpp"
#include "illume/geometry.hpp"
#include "illume/tensor.hpp"

namespace illume::dataio {

enum class ColumnKind { kContinuous, kCategorical, kLabel };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
};

struct DataSchema {
  std::vector<ColumnSpec> columns;

  bool has_label() const {
    for (const auto& c : columns)
      if (c.kind == ColumnKind::kLabel) return true;
    return false;
  }
};

/// Raw comma-separated table (no quoting; whitespace trimmed).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw contract_error("non-numeric value '" + s + "' in " + what);
  }
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw contract_error("cannot open CSV file: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size())
        throw contract_error("CSV row width mismatch in " + path);
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw contract_error("empty CSV file: " + path);
  return t;
}

/// Fitted preprocessing: one-hot expansion for categorical columns plus
/// standardization of continuous columns with training-split statistics.
struct Preprocessor {
  struct ContColumn {
    std::string name;
    double mean = 0.0;
    double std = 1.0;
  };
  struct CatColumn {
    std::string name;
    std::vector<std::string> categories;  // sorted training-split values
  };
  std::vector<ColumnSpec> raw_order;  // feature columns in CSV order
  std::vector<ContColumn> cont;
  std::vector<CatColumn> cat;

  std::size_t feature_count() const {
    std::size_t m = cont.size();
    for (const auto& c : cat) m += c.categories.size();
    return m;
  }

  /// Expanded feature names: continuous first (CSV order), then one-hot
  /// groups column by column.
  std::vector<std::string> feature_names() const {
    std::vector<std::string> names;
    for (const auto& c : cont) names.push_back(c.name);
    for (const auto& c : cat)
      for (const auto& v : c.categories) names.push_back(c.name + "=" + v);
    return names;
  }

  geometry::FeatureSchema feature_schema() const {
    geometry::FeatureSchema s;
    s.m = feature_count();
    for (std::size_t j = 0; j < cont.size(); ++j) s.continuous_indices.push_back(j);
    std::size_t off = cont.size();
    for (const auto& c : cat) {
      std::vector<std::size_t> group(c.categories.size());
      std::iota(group.begin(), group.end(), off);
      s.categorical_groups.push_back(group);
      off += c.categories.size();
    }
    return s;
  }

  /// Raw string cells (feature columns only, in raw_order) -> numeric row.
  /// Unseen categories map to an all-zero group; the caller counts warnings.
  std::vector<double> transform(const std::vector<std::string>& cells,
                                std::size_t* unseen_categories = nullptr) const {
    std::vector<double> raw_cont;
    std::vector<double> out(feature_count(), 0.0);
    std::size_t ci = 0, gi = 0, cell = 0;
    std::size_t cat_offset = cont.size();
    for (const auto& spec : raw_order) {
      const std::string& v = cells[cell++];
      if (spec.kind == ColumnKind::kContinuous) {
        const double x = detail::parse_double(v, "column " + spec.name);
        out[ci] = (x - cont[ci].mean) / cont[ci].std;
        ++ci;
      } else {
        const auto& cats = cat[gi].categories;
        auto it = std::lower_bound(cats.begin(), cats.end(), v);
        if (it != cats.end() && *it == v) {
          out[cat_offset + static_cast<std::size_t>(it - cats.begin())] = 1.0;
        } else if (unseen_categories) {
          ++*unseen_categories;
        }
        cat_offset += cats.size();
        ++gi;
      }
    }
    return out;
  }

  /// Raw (unstandardized) continuous values of a row, for callers that need
  /// the original coordinates.
  std::vector<double> raw_continuous(const std::vector<std::string>& cells) const {
    std::vector<double> out;
    std::size_t cell = 0, ci = 0;
    for (const auto& spec : raw_order) {
      const std::string& v = cells[cell++];
      if (spec.kind == ColumnKind::kContinuous) {
        out.push_back(detail::parse_double(v, "column " + spec.name));
        ++ci;
      }
    }
    return out;
  }
};

struct Dataset {
  Tensor X;  // n×m preprocessed feature matrix
  Tensor X_raw_continuous;  // n×(#continuous) original values (synthetic adapters)
  geometry::FeatureSchema schema;
  Preprocessor prep;
  std::vector<int> labels;  // ground truth, when the schema names a label column
  bool has_labels = false;
  std::size_t n_classes = 0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::size_t unseen_category_count = 0;

  std::size_t rows() const { return X.rows(); }
  std::size_t features() const { return X.cols(); }

  Tensor slice(const std::vector<std::size_t>& rows_idx) const {
    Tensor out = Tensor::zeros({rows_idx.size(), X.cols()});
    for (std::size_t i = 0; i < rows_idx.size(); ++i)
      for (std::size_t j = 0; j < X.cols(); ++j) out.at(i, j) = X.at(rows_idx[i], j);
    return out;
  }
};

/// Seeded 80/20 split over row indices.
inline void make_split(std::size_t n, std::uint64_t split_seed, double train_fraction,
                       std::vector<std::size_t>& train, std::vector<std::size_t>& test) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(split_seed ^ 0x5EED5EEDULL);
  rng.shuffle(idx);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  train.assign(idx.begin(), idx.begin() + std::min(n_train, n));
  test.assign(idx.begin() + std::min(n_train, n), idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

/// Loads a CSV against a schema, splits 80/20 with the given seed, fits the
/// preprocessing on the training split only, and transforms every row.
inline Dataset load_dataset(const CsvTable& table, const DataSchema& schema,
                            std::uint64_t split_seed, double train_fraction = 0.8) {
  // Column lookup by name; every schema column must exist.
  std::map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < table.header.size(); ++j) col_of[table.header[j]] = j;
  std::vector<std::size_t> feature_cells;
  std::size_t label_cell = table.header.size();
  Dataset ds;
  for (const auto& spec : schema.columns) {
    auto it = col_of.find(spec.name);
    if (it == col_of.end()) throw contract_error("schema column not in CSV: " + spec.name);
    if (spec.kind == ColumnKind::kLabel) {
      label_cell = it->second;
    } else {
      feature_cells.push_back(it->second);
      ds.prep.raw_order.push_back(spec);
    }
  }
  for (const auto& [name, j] : col_of) {
    bool known = false;
    for (const auto& spec : schema.columns) known = known || spec.name == name;
    if (!known) throw contract_error("CSV column not in schema: " + name);
  }

  const std::size_t n = table.rows.size();
  if (n == 0) throw contract_error("dataset has no rows");
  make_split(n, split_seed, train_fraction, ds.train_rows, ds.test_rows);

  // Fit continuous statistics and categorical vocabularies on training rows.
  std::size_t ci = 0;
  for (std::size_t fi = 0; fi < ds.prep.raw_order.size(); ++fi) {
    const auto& spec = ds.prep.raw_order[fi];
    if (spec.kind == ColumnKind::kContinuous) {
      Preprocessor::ContColumn col;
      col.name = spec.name;
      double mean = 0.0;
      for (std::size_t i : ds.train_rows)
        mean += detail::parse_double(table.rows[i][feature_cells[fi]], "column " + spec.name);
      mean /= static_cast<double>(ds.train_rows.size());
      double var = 0.0;
      for (std::size_t i : ds.train_rows) {
        const double d =
            detail::parse_double(table.rows[i][feature_cells[fi]], "column " + spec.name) - mean;
        var += d * d;
      }
      var /= static_cast<double>(ds.train_rows.size());
      col.mean = mean;
      col.std = var > 0.0 ? std::sqrt(var) : 1.0;
      ds.prep.cont.push_back(col);
      ++ci;
    } else {
      Preprocessor::CatColumn col;
      col.name = spec.name;
      std::vector<std::string> vals;
      for (std::size_t i : ds.train_rows) vals.push_back(table.rows[i][feature_cells[fi]]);
      std::sort(vals.begin(), vals.end());
      vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
      col.categories = std::move(vals);
      ds.prep.cat.push_back(col);
    }
  }

  // Transform all rows (feature cells in raw_order).
  const std::size_t m = ds.prep.feature_count();
  ds.X = Tensor::zeros({n, m});
  ds.X_raw_continuous = Tensor::zeros({n, ds.prep.cont.size()});
  std::vector<std::string> cells(ds.prep.raw_order.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t fi = 0; fi < feature_cells.size(); ++fi)
      cells[fi] = table.rows[i][feature_cells[fi]];
    auto row = ds.prep.transform(cells, &ds.unseen_category_count);
    for (std::size_t j = 0; j < m; ++j) ds.X.at(i, j) = row[j];
    auto raw = ds.prep.raw_continuous(cells);
    for (std::size_t j = 0; j < raw.size(); ++j) ds.X_raw_continuous.at(i, j) = raw[j];
  }
  ds.schema = ds.prep.feature_schema();
  ds.schema.validate();

  // Labels: numeric when all values parse as integers, else lexicographic.
  if (label_cell < table.header.size()) {
    ds.has_labels = true;
    std::vector<std::string> raw(n);
    for (std::size_t i = 0; i < n; ++i) raw[i] = table.rows[i][label_cell];
    std::vector<std::string> distinct = raw;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    bool all_int = true;
    std::vector<long long> as_int(distinct.size());
    for (std::size_t t = 0; t < distinct.size(); ++t) {
      const auto& s = distinct[t];
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), as_int[t]);
      if (ec != std::errc() || p != s.data() + s.size()) {
        all_int = false;
        break;
      }
    }
    if (all_int) {
      std::vector<std::size_t> ord(distinct.size());
      std::iota(ord.begin(), ord.end(), std::size_t{0});
      std::sort(ord.begin(), ord.end(),
                [&](std::size_t a, std::size_t b) { return as_int[a] < as_int[b]; });
      std::vector<std::string> sorted(distinct.size());
      for (std::size_t t = 0; t < distinct.size(); ++t) sorted[t] = distinct[ord[t]];
      distinct = std::move(sorted);
    }
    std::map<std::string, int> id;
    for (std::size_t t = 0; t < distinct.size(); ++t) id[distinct[t]] = static_cast<int>(t);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) ds.labels[i] = id[raw[i]];
    ds.n_classes = distinct.size();
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Black-box outputs
// ---------------------------------------------------------------------------

struct BlackBoxOutputs {
  Tensor probs;             // n×c aligned with dataset rows
  std::vector<int> labels;  // argmax, ties to the lowest class
  std::size_t classes = 0;

  void derive_labels() {
    labels.resize(probs.rows());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < probs.cols(); ++c)
        if (probs.at(i, c) > probs.at(i, best)) best = c;
      labels[i] = static_cast<int>(best);
    }
  }
};

/// Predictions CSV: header `row_id,p0,p1,...`; every dataset row id must
/// appear exactly once (row ids are the 0-based CSV data row positions).
inline BlackBoxOutputs load_predictions_csv(const CsvTable& table, std::size_t n_rows) {
  if (table.header.size() < 3 || table.header[0] != "row_id")
    throw contract_error("predictions CSV must have header row_id,p0,p1,...");
  const std::size_t c = table.header.size() - 1;
  if (table.rows.size() != n_rows)
    throw contract_error("predictions row count does not match the dataset");
  BlackBoxOutputs out;
  out.classes = c;
  out.probs = Tensor::zeros({n_rows, c});
  std::vector<char> seen(n_rows, 0);
  for (const auto& row : table.rows) {
    const double idv = detail::parse_double(row[0], "row_id");
    const auto id = static_cast<std::size_t>(idv);
    if (idv != static_cast<double>(id) || id >= n_rows || seen[id])
      throw contract_error("predictions misaligned: bad or duplicate row_id " + row[0]);
    seen[id] = 1;
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = detail::parse_double(row[j + 1], "probability");
      if (p < -1e-9 || p > 1.0 + 1e-9)
        throw contract_error("probability outside [0,1] at row " + row[0]);
      out.probs.at(id, j) = p;
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw contract_error("probability row does not sum to 1 at row " + row[0]);
  }
  out.derive_labels();
  return out;
}

}  // namespace illume::dataio

#endif  // ILLUME_DATAIO_HPP
