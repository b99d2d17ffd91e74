/*
 * Copyright 2026 The obprop Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Datasets, CSV interchange, the synthetic customer generator, feature
// scaling and stratified fold planning.

#ifndef OBPROP_DATA_HPP_
#define OBPROP_DATA_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "obprop/common.hpp"

namespace obprop {

// Insertion-ordered JSON; artifact key order is part of the output format.
using Json = nlohmann::ordered_json;

enum class FeatureKind { continuous, count, binary };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::continuous:
      return "continuous";
    case FeatureKind::count:
      return "count";
    case FeatureKind::binary:
      return "binary";
  }
  return "continuous";
}

inline FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "continuous") return FeatureKind::continuous;
  if (text == "count") return FeatureKind::count;
  if (text == "binary") return FeatureKind::binary;
  throw ConfigError("unknown feature kind '" + std::string(text) + "'");
}

struct FeatureSchema {
  std::vector<std::string> names;
  std::vector<FeatureKind> kinds;

  std::size_t size() const { return names.size(); }

  void validate() const {
    if (names.size() != kinds.size()) {
      throw DataError("schema: names and kinds differ in length");
    }
    std::unordered_set<std::string> seen;
    for (const auto& name : names) {
      if (name.empty()) throw DataError("schema: empty feature name");
      if (name == "label") {
        throw DataError("schema: 'label' is reserved for the target column");
      }
      if (!seen.insert(name).second) {
        throw DataError("schema: duplicate feature name '" + name + "'");
      }
    }
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) return j;
    }
    return std::nullopt;
  }

  bool operator==(const FeatureSchema&) const = default;
};

struct ClassCounts {
  std::size_t negatives = 0;
  std::size_t positives = 0;

  std::size_t total() const { return negatives + positives; }
  bool operator==(const ClassCounts&) const = default;
};

// Row-major feature matrix with binary labels (1 = shared data). Immutable
// once constructed; the constructor enforces every invariant.
class Dataset {
 public:
  Dataset() = default;

  Dataset(FeatureSchema schema, std::vector<double> values,
          std::vector<std::uint8_t> labels)
      : schema_(std::move(schema)),
        values_(std::move(values)),
        labels_(std::move(labels)) {
    schema_.validate();
    const std::size_t d = schema_.size();
    if (d == 0) throw DataError("dataset: no feature columns");
    if (values_.size() != labels_.size() * d) {
      throw DataError("dataset: matrix size does not match label count");
    }
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] > 1) throw DataError("dataset: label outside {0,1}");
      for (std::size_t j = 0; j < d; ++j) {
        const double v = values_[i * d + j];
        if (!std::isfinite(v)) {
          throw DataError("dataset: non-finite value at row " +
                          std::to_string(i + 1) + ", column " +
                          schema_.names[j]);
        }
        if (schema_.kinds[j] == FeatureKind::binary && v != 0.0 && v != 1.0) {
          throw DataError("dataset: binary column " + schema_.names[j] +
                          " holds " + format_double(v) + " at row " +
                          std::to_string(i + 1));
        }
      }
    }
  }

  const FeatureSchema& schema() const { return schema_; }
  std::size_t rows() const { return labels_.size(); }
  std::size_t cols() const { return schema_.size(); }
  bool empty() const { return labels_.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t j) const {
    return values_[i * cols() + j];
  }
  std::uint8_t label(std::size_t i) const { return labels_[i]; }

  const std::vector<double>& values() const { return values_; }
  const std::vector<std::uint8_t>& labels() const { return labels_; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(rows());
    for (std::size_t i = 0; i < rows(); ++i) out[i] = at(i, j);
    return out;
  }

  ClassCounts class_counts() const {
    ClassCounts c;
    for (auto y : labels_) (y ? c.positives : c.negatives)++;
    return c;
  }

  void require_both_classes(std::string_view op) const {
    const auto c = class_counts();
    if (c.positives == 0 || c.negatives == 0) {
      throw DataError(std::string(op) +
                      ": dataset must contain both classes (positives=" +
                      std::to_string(c.positives) +
                      ", negatives=" + std::to_string(c.negatives) + ")");
    }
  }

  Dataset subset(std::span<const std::size_t> indices) const {
    std::vector<double> vals;
    vals.reserve(indices.size() * cols());
    std::vector<std::uint8_t> labs;
    labs.reserve(indices.size());
    for (auto i : indices) {
      auto r = row(i);
      vals.insert(vals.end(), r.begin(), r.end());
      labs.push_back(labels_[i]);
    }
    return Dataset(schema_, std::move(vals), std::move(labs));
  }

  bool operator==(const Dataset&) const = default;

 private:
  FeatureSchema schema_;
  std::vector<double> values_;
  std::vector<std::uint8_t> labels_;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  for (auto& c : cells) {
    const auto b = c.find_first_not_of(" \t");
    const auto e = c.find_last_not_of(" \t");
    c = (b == std::string::npos) ? std::string() : c.substr(b, e - b + 1);
  }
  return cells;
}

inline FeatureKind infer_kind(const std::vector<double>& column) {
  bool binary = true;
  bool integral = true;
  for (double v : column) {
    if (v != 0.0 && v != 1.0) binary = false;
    if (v != std::floor(v)) integral = false;
  }
  if (binary) return FeatureKind::binary;
  if (integral) return FeatureKind::count;
  return FeatureKind::continuous;
}

}  // namespace detail

// Reads a CSV with a header row whose last column is `label`. When `schema`
// is given, its names must match the header; otherwise kinds are inferred
// per column.
inline Dataset load_csv(const std::filesystem::path& path,
                        const std::optional<FeatureSchema>& schema =
                            std::nullopt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("'" + path.string() + "' is empty; expected a header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw DataError("header must have at least one feature and end with "
                    "'label'");
  }
  header.pop_back();
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : header) {
      if (!seen.insert(h).second) {
        throw DataError("duplicate header name '" + h + "'");
      }
    }
  }
  const std::size_t d = header.size();

  std::vector<double> values;
  std::vector<std::uint8_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t row_no = labels.size() + 1;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != d + 1) {
      throw DataError("row " + std::to_string(row_no) + " (line " +
                      std::to_string(line_no) + ") has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(d + 1));
    }
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0.0;
      if (!parse_double(cells[j], v) || !std::isfinite(v)) {
        throw DataError("non-numeric value '" + cells[j] + "' at row " +
                        std::to_string(row_no) + ", column " + header[j] +
                        " (line " + std::to_string(line_no) + ")");
      }
      values.push_back(v);
    }
    const auto& lab = cells[d];
    if (lab == "0" || lab == "0.0") {
      labels.push_back(0);
    } else if (lab == "1" || lab == "1.0") {
      labels.push_back(1);
    } else {
      throw DataError("label value '" + lab + "' outside {0,1} at row " +
                      std::to_string(row_no) + " (line " +
                      std::to_string(line_no) + ")");
    }
  }

  FeatureSchema resolved;
  resolved.names = header;
  if (schema) {
    resolved.kinds.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      auto idx = schema->index_of(header[j]);
      if (!idx) {
        throw DataError("column '" + header[j] + "' missing from schema");
      }
      resolved.kinds[j] = schema->kinds[*idx];
    }
    if (schema->size() != d) {
      throw DataError("schema lists " + std::to_string(schema->size()) +
                      " features but the header has " + std::to_string(d));
    }
  } else {
    const std::size_t n = labels.size();
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = values[i * d + j];
      resolved.kinds.push_back(detail::infer_kind(col));
    }
  }
  return Dataset(std::move(resolved), std::move(values), std::move(labels));
}

inline void write_csv(const Dataset& ds, std::ostream& out) {
  const auto& names = ds.schema().names;
  for (const auto& name : names) out << name << ',';
  out << "label\n";
  std::string line;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    line.clear();
    for (double v : ds.row(i)) {
      line += format_double(v);
      line += ',';
    }
    line += ds.label(i) ? '1' : '0';
    line += '\n';
    out << line;
  }
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StageError("cannot write '" + path.string() + "'");
  write_csv(ds, out);
}

// Schema sidecar: a JSON object mapping feature name to kind, in column order.
inline Json schema_to_json(const FeatureSchema& schema) {
  Json j = Json::object();
  for (std::size_t k = 0; k < schema.size(); ++k) {
    j[schema.names[k]] = std::string(to_string(schema.kinds[k]));
  }
  return j;
}

inline FeatureSchema schema_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("schema sidecar must be an object");
  FeatureSchema schema;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) {
      throw ConfigError("schema kind for '" + it.key() + "' must be a string");
    }
    schema.names.push_back(it.key());
    schema.kinds.push_back(parse_feature_kind(it.value().get<std::string>()));
  }
  schema.validate();
  return schema;
}

inline FeatureSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema '" + path.string() + "'");
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("schema '" + path.string() + "': " + e.what());
  }
  return schema_from_json(j);
}

// ---------------------------------------------------------------------------
// Scaling

struct ScalerParams {
  std::vector<double> means;
  std::vector<double> stddevs;

  void apply_row(std::span<const double> in, std::span<double> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) {
      out[j] = (in[j] - means[j]) / stddevs[j];
    }
  }

  // Row-major standardized copy of the feature matrix.
  std::vector<double> transform(const Dataset& ds) const {
    std::vector<double> out(ds.values().size());
    const std::size_t d = ds.cols();
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      apply_row(ds.row(i), {out.data() + i * d, d});
    }
    return out;
  }

  Dataset apply(const Dataset& ds) const {
    return Dataset(ds.schema(), transform(ds), ds.labels());
  }
};

// Mean and sample standard deviation (n-1) per continuous/count column.
// Binary and constant columns get the identity transform (mean 0, stddev 1).
inline ScalerParams fit_scaler(const Dataset& ds) {
  const std::size_t n = ds.rows();
  const std::size_t d = ds.cols();
  ScalerParams p{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
  if (n < 2) return p;
  for (std::size_t j = 0; j < d; ++j) {
    if (ds.schema().kinds[j] == FeatureKind::binary) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += ds.at(i, j);
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = ds.at(i, j) - mean;
      ss += dv * dv;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd > 0.0 && std::isfinite(sd)) {
      p.means[j] = mean;
      p.stddevs[j] = sd;
    }
  }
  return p;
}

inline std::pair<Dataset, ScalerParams> standardize(const Dataset& ds) {
  if (ds.empty()) throw DataError("standardize: empty dataset");
  auto params = fit_scaler(ds);
  return {params.apply(ds), std::move(params)};
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct GeneratorConfig {
  std::size_t n = 50000;
  double prevalence = 0.0038;
  FeatureSchema schema;
  std::vector<double> coefficients;
  double intercept = -6.0;
  double noise_stddev = 0.5;
  std::uint64_t seed = 0;

  std::size_t positive_count() const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(n) * prevalence));
  }

  void validate() const {
    if (!(prevalence > 0.0 && prevalence < 1.0)) {
      throw ConfigError("generator: prevalence must lie in (0,1)");
    }
    if (static_cast<double>(n) * prevalence < 1.0 || positive_count() < 1) {
      throw ConfigError("generator: n * prevalence < 1 leaves no positives");
    }
    if (positive_count() >= n) {
      throw ConfigError("generator: prevalence leaves no negatives");
    }
    schema.validate();
    if (coefficients.size() != schema.size()) {
      throw ConfigError("generator: one coefficient per feature required");
    }
    if (!(noise_stddev >= 0.0)) {
      throw ConfigError("generator: noise stddev must be nonnegative");
    }
  }
};

// Shape of one synthetic column: a latent standard normal, partly driven by
// a shared digital-engagement factor, pushed through a kind-specific map.
struct GeneratedFeature {
  std::string name;
  FeatureKind kind;
  double engagement_loading;  // correlation with the shared factor
  double location;            // log-scale location, or probit cut for binary
  double scale;               // log-scale spread (unused for binary)
  double coefficient;         // planted logit weight
};

inline const std::vector<GeneratedFeature>& default_feature_family() {
  static const std::vector<GeneratedFeature> family = {
      {"mobile_interactions", FeatureKind::count, 0.6, 2.5, 0.9, 1.6},
      {"mobile_transactions", FeatureKind::count, 0.6, 2.0, 1.0, 1.0},
      {"digital_interactions", FeatureKind::count, 0.5, 1.8, 0.9, 0.6},
      {"digital_activity", FeatureKind::binary, 0.5, -0.8, 0.0, 1.2},
      {"credit_value_total", FeatureKind::continuous, 0.0, 8.0, 1.0, -0.7},
      {"national_card_credit", FeatureKind::continuous, 0.0, 7.0, 1.2, 0.8},
      {"overdue_credit", FeatureKind::binary, 0.0, 1.3, 0.0, 0.9},
      {"education_masters", FeatureKind::binary, 0.0, 1.5, 0.0, -0.6},
      {"relationship_months", FeatureKind::count, 0.0, 3.5, 0.6, -0.3},
      {"investment_balance", FeatureKind::continuous, 0.0, 6.5, 1.0, 0.0},
  };
  return family;
}

inline constexpr double kOutflowPrevalence = 0.0038;
inline constexpr double kInflowPrevalence = 0.00093;

inline GeneratorConfig default_generator_config(std::size_t n,
                                                double prevalence,
                                                std::uint64_t seed) {
  GeneratorConfig cfg;
  cfg.n = n;
  cfg.prevalence = prevalence;
  cfg.seed = seed;
  for (const auto& f : default_feature_family()) {
    cfg.schema.names.push_back(f.name);
    cfg.schema.kinds.push_back(f.kind);
    cfg.coefficients.push_back(f.coefficient);
  }
  return cfg;
}

// Column transform used by the planted score: log1p for magnitudes,
// identity for flags.
inline double planted_term(FeatureKind kind, double x) {
  return kind == FeatureKind::binary ? x : std::log1p(std::max(x, 0.0));
}

// Draws n customers and labels the round(n * prevalence) rows with the highest
// planted score positive (ties go to the lower row index). Features whose
// names appear in the default family use that family's marginal shape; any
// other feature is drawn from a generic shape of its kind.
inline Dataset generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n;
  const std::size_t d = cfg.schema.size();

  std::vector<GeneratedFeature> shapes(d);
  for (std::size_t j = 0; j < d; ++j) {
    GeneratedFeature g{cfg.schema.names[j], cfg.schema.kinds[j], 0.0, 0.0,
                       1.0, cfg.coefficients[j]};
    switch (g.kind) {
      case FeatureKind::count:
        g.location = 2.0;
        g.scale = 1.0;
        break;
      case FeatureKind::continuous:
        g.location = 5.0;
        g.scale = 1.0;
        break;
      case FeatureKind::binary:
        g.location = 0.0;
        break;
    }
    for (const auto& f : default_feature_family()) {
      if (f.name == g.name && f.kind == g.kind) {
        g.engagement_loading = f.engagement_loading;
        g.location = f.location;
        g.scale = f.scale;
      }
    }
    shapes[j] = g;
  }

  std::mt19937_64 rng(derive_seed(cfg.seed, "generate"));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> values(n * d);
  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double engagement = normal(rng);
    double s = cfg.intercept;
    for (std::size_t j = 0; j < d; ++j) {
      const auto& g = shapes[j];
      const double rho = g.engagement_loading;
      const double z =
          rho * engagement + std::sqrt(1.0 - rho * rho) * normal(rng);
      double x = 0.0;
      switch (g.kind) {
        case FeatureKind::count:
          x = std::floor(std::exp(g.location + g.scale * z));
          break;
        case FeatureKind::continuous:
          // Rounded to cents like a monetary amount.
          x = std::round(std::exp(g.location + g.scale * z) * 100.0) / 100.0;
          break;
        case FeatureKind::binary:
          x = z > g.location ? 1.0 : 0.0;
          break;
      }
      values[i * d + j] = x;
      s += cfg.coefficients[j] * planted_term(g.kind, x);
    }
    const double noise = normal(rng);
    score[i] = s + cfg.noise_stddev * noise;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return score[a] > score[b];
                   });
  std::vector<std::uint8_t> labels(n, 0);
  for (std::size_t r = 0; r < cfg.positive_count(); ++r) labels[order[r]] = 1;
  return Dataset(cfg.schema, std::move(values), std::move(labels));
}

// ---------------------------------------------------------------------------
// Stratified folds

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::uint64_t seed = 0;
  std::vector<bool> positive_free;  // per fold

  std::size_t positive_free_count() const {
    return static_cast<std::size_t>(
        std::count(positive_free.begin(), positive_free.end(), true));
  }

  std::vector<std::size_t> test_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == fold) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> train_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] != fold) out.push_back(i);
    }
    return out;
  }
};

// Shuffles each class with the seed, then deals positives followed by
// negatives round-robin across folds. Dealing one continuous sequence keeps
// both fold sizes and per-fold positive counts within one of each other.
inline FoldPlan stratified_kfold(const Dataset& ds, std::size_t k,
                                 std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be at least 2");
  if (k > ds.rows()) {
    throw ConfigError("stratified_kfold: k=" + std::to_string(k) +
                      " exceeds row count " + std::to_string(ds.rows()));
  }
  ds.require_both_classes("stratified_kfold");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    (ds.label(i) ? pos : neg).push_back(i);
  }
  std::mt19937_64 rng(derive_seed(seed, "folds"));
  std::shuffle(pos.begin(), pos.end(), rng);
  std::shuffle(neg.begin(), neg.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(ds.rows(), 0);
  std::size_t slot = 0;
  for (auto i : pos) plan.assignments[i] = slot++ % k;
  for (auto i : neg) plan.assignments[i] = slot++ % k;
  plan.positive_free.assign(k, false);
  for (std::size_t f = pos.size(); f < k; ++f) plan.positive_free[f] = true;
  return plan;
}

}  // namespace obprop

#endif  // OBPROP_DATA_HPP_
