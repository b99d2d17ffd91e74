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

// Model explanation: path-dependent TreeSHAP attributions on the margin
// scale, a brute-force Shapley reference, global importance shares, and a
// Gini classification tree fitted on SHAP values with rule extraction.

#ifndef OBPROP_EXPLAIN_HPP_
#define OBPROP_EXPLAIN_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "obprop/common.hpp"
#include "obprop/data.hpp"
#include "obprop/gbt.hpp"

namespace obprop {

struct ShapRow {
  std::vector<double> phi;
  double base_value = 0.0;
  double margin = 0.0;
};

// ---------------------------------------------------------------------------
// TreeSHAP

namespace detail {

struct PathElement {
  int feature;
  double zero_fraction;
  double one_fraction;
  double weight;
};

inline void extend_path(PathElement* path, std::size_t depth,
                        double zero_fraction, double one_fraction,
                        int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double denom = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].weight +=
        one_fraction * path[k].weight * static_cast<double>(k + 1) / denom;
    path[k].weight =
        zero_fraction * path[k].weight * static_cast<double>(depth - k) / denom;
  }
}

inline void unwind_path(PathElement* path, std::size_t depth,
                        std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one = path[depth].weight;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[k].weight;
      path[k].weight = next_one * denom / (static_cast<double>(k + 1) * one);
      next_one = tmp - path[k].weight * zero * static_cast<double>(depth - k) /
                           denom;
    } else {
      path[k].weight =
          path[k].weight * denom / (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = index; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero_fraction = path[k + 1].zero_fraction;
    path[k].one_fraction = path[k + 1].one_fraction;
  }
}

inline double unwound_path_sum(const PathElement* path, std::size_t depth,
                               std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double denom = static_cast<double>(depth + 1);
  double next_one = path[depth].weight;
  double total = 0.0;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one * denom / (static_cast<double>(k + 1) * one);
      total += tmp;
      next_one = path[k].weight -
                 tmp * zero * static_cast<double>(depth - k) / denom;
    } else {
      total += path[k].weight / zero / (static_cast<double>(depth - k) / denom);
    }
  }
  return total;
}

// `parent` holds the caller's path; this node's path is written just past it.
inline void tree_shap_recurse(const RegressionTree& tree,
                              std::span<const double> row, double* phi,
                              std::size_t node, std::size_t depth,
                              PathElement* parent, double parent_zero,
                              double parent_one, int parent_feature) {
  PathElement* path = parent + depth + 1;
  std::copy(parent, parent + depth + 1, path);
  extend_path(path, depth, parent_zero, parent_one, parent_feature);

  const auto& n = tree.nodes[node];
  if (n.is_leaf()) {
    for (std::size_t k = 1; k <= depth; ++k) {
      const double w = unwound_path_sum(path, depth, k);
      const auto& el = path[k];
      phi[el.feature] += w * (el.one_fraction - el.zero_fraction) * n.value;
    }
    return;
  }

  const auto left = static_cast<std::size_t>(n.left);
  const auto right = static_cast<std::size_t>(n.right);
  const std::size_t hot =
      row[static_cast<std::size_t>(n.feature)] <= n.threshold ? left : right;
  const std::size_t cold = hot == left ? right : left;
  const double hot_zero = tree.nodes[hot].cover / n.cover;
  const double cold_zero = tree.nodes[cold].cover / n.cover;

  double incoming_zero = 1.0;
  double incoming_one = 1.0;
  std::size_t k = 0;
  for (; k <= depth; ++k) {
    if (path[k].feature == n.feature) break;
  }
  if (k <= depth) {
    incoming_zero = path[k].zero_fraction;
    incoming_one = path[k].one_fraction;
    unwind_path(path, depth, k);
    --depth;
  }
  tree_shap_recurse(tree, row, phi, hot, depth + 1, path,
                    hot_zero * incoming_zero, incoming_one, n.feature);
  tree_shap_recurse(tree, row, phi, cold, depth + 1, path,
                    cold_zero * incoming_zero, 0.0, n.feature);
}

inline void check_covers(const RegressionTree& tree) {
  for (const auto& n : tree.nodes) {
    if (!(n.cover > 0.0)) {
      throw DataError("tree_shap: node with non-positive cover (corrupt model)");
    }
  }
}

}  // namespace detail

// Cover-weighted mean leaf value of one tree.
inline double expected_value(const RegressionTree& tree) {
  double sum = 0.0;
  for (const auto& n : tree.nodes) {
    if (n.is_leaf()) sum += n.value * n.cover;
  }
  return sum / tree.nodes[0].cover;
}

inline double base_value(const GradientBoostedEnsemble& model) {
  double b = model.base_margin;
  for (const auto& t : model.trees) b += expected_value(t);
  return b;
}

// Adds one tree's attributions into `phi`.
inline void tree_shap_accumulate(const RegressionTree& tree,
                                 std::span<const double> row,
                                 std::span<double> phi) {
  const std::size_t max_depth = tree.height() + 2;
  std::vector<detail::PathElement> buffer((max_depth + 1) * (max_depth + 2) /
                                              2 +
                                          1);
  detail::tree_shap_recurse(tree, row, phi.data(), 0, 0, buffer.data(), 1.0,
                            1.0, -1);
}

inline ShapRow tree_shap(const GradientBoostedEnsemble& model,
                         std::span<const double> row) {
  model.check_width(row.size());
  ShapRow out;
  out.phi.assign(row.size(), 0.0);
  std::size_t height = 0;
  for (const auto& t : model.trees) {
    detail::check_covers(t);
    height = std::max(height, t.height());
  }
  const std::size_t max_depth = height + 2;
  std::vector<detail::PathElement> buffer((max_depth + 1) * (max_depth + 2) /
                                              2 +
                                          1);
  for (const auto& t : model.trees) {
    detail::tree_shap_recurse(t, row, out.phi.data(), 0, 0, buffer.data(), 1.0,
                              1.0, -1);
  }
  out.base_value = base_value(model);
  out.margin = model.predict_margin(row);
  return out;
}

// ---------------------------------------------------------------------------
// Brute-force Shapley reference

namespace detail {

// Cover-weighted expectation of a tree when only features in `known` (bit
// mask) are fixed to the row's values.
inline double conditional_expectation(const RegressionTree& tree,
                                      std::span<const double> row,
                                      std::uint32_t known, std::size_t node) {
  const auto& n = tree.nodes[node];
  if (n.is_leaf()) return n.value;
  const auto left = static_cast<std::size_t>(n.left);
  const auto right = static_cast<std::size_t>(n.right);
  if (known & (1u << n.feature)) {
    return conditional_expectation(
        tree, row, known,
        row[static_cast<std::size_t>(n.feature)] <= n.threshold ? left
                                                                : right);
  }
  return (tree.nodes[left].cover *
              conditional_expectation(tree, row, known, left) +
          tree.nodes[right].cover *
              conditional_expectation(tree, row, known, right)) /
         n.cover;
}

}  // namespace detail

inline constexpr std::size_t kMaxOracleFeatures = 12;

// Shapley values by enumerating all 2^d coalitions. Exponential in d; meant
// as a reference for tree_shap.
inline ShapRow exact_shapley_oracle(const GradientBoostedEnsemble& model,
                                    std::span<const double> row) {
  model.check_width(row.size());
  const std::size_t d = row.size();
  if (d > kMaxOracleFeatures) {
    throw ConfigError("exact_shapley_oracle: at most 12 features");
  }
  for (const auto& t : model.trees) detail::check_covers(t);

  const std::uint32_t subsets = 1u << d;
  std::vector<double> value(subsets, model.base_margin);
  for (std::uint32_t s = 0; s < subsets; ++s) {
    for (const auto& t : model.trees) {
      value[s] += detail::conditional_expectation(t, row, s, 0);
    }
  }
  std::vector<double> factorial(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) {
    factorial[i] = factorial[i - 1] * static_cast<double>(i);
  }

  ShapRow out;
  out.phi.assign(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const double w =
          factorial[size] * factorial[d - size - 1] / factorial[d];
      out.phi[j] += w * (value[s | bit] - value[s]);
    }
  }
  out.base_value = value[0];
  out.margin = model.predict_margin(row);
  return out;
}

// ---------------------------------------------------------------------------
// Whole-dataset attributions and importance

struct ShapMatrix {
  std::vector<std::string> features;
  std::vector<double> phi;  // row-major, rows x features
  std::vector<double> margins;
  double base_value = 0.0;

  std::size_t rows() const { return margins.size(); }
  std::size_t cols() const { return features.size(); }
  std::span<const double> row(std::size_t i) const {
    return {phi.data() + i * cols(), cols()};
  }
  double at(std::size_t i, std::size_t j) const { return phi[i * cols() + j]; }
};

inline ShapMatrix shap_matrix(const GradientBoostedEnsemble& model,
                              const Dataset& ds, unsigned threads = 1) {
  if (ds.schema().names != model.schema.names) {
    throw DataError("shap_matrix: dataset columns do not match the model");
  }
  for (const auto& t : model.trees) detail::check_covers(t);
  const std::size_t n = ds.rows();
  const std::size_t d = ds.cols();
  ShapMatrix sm;
  sm.features = model.schema.names;
  sm.phi.assign(n * d, 0.0);
  sm.margins.assign(n, 0.0);
  sm.base_value = base_value(model);

  std::size_t height = 0;
  for (const auto& t : model.trees) height = std::max(height, t.height());
  const std::size_t max_depth = height + 2;
  const std::size_t buffer_size =
      (max_depth + 1) * (max_depth + 2) / 2 + 1;

  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<detail::PathElement> buffer(buffer_size);
    const std::size_t end = std::min(n, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      const auto row = ds.row(i);
      double* phi = sm.phi.data() + i * d;
      for (const auto& t : model.trees) {
        detail::tree_shap_recurse(t, row, phi, 0, 0, buffer.data(), 1.0, 1.0,
                                  -1);
      }
      sm.margins[i] = model.predict_margin(row);
    }
  });
  return sm;
}

inline void write_shap_csv(const ShapMatrix& sm, std::ostream& out) {
  for (const auto& f : sm.features) out << f << ',';
  out << "base_value,margin\n";
  std::string line;
  for (std::size_t i = 0; i < sm.rows(); ++i) {
    line.clear();
    for (double v : sm.row(i)) {
      line += format_double(v);
      line += ',';
    }
    line += format_double(sm.base_value);
    line += ',';
    line += format_double(sm.margins[i]);
    line += '\n';
    out << line;
  }
}

struct ImportanceEntry {
  std::string feature;
  std::size_t index = 0;
  double mean_abs = 0.0;
  double share = 0.0;  // percent
};

using RankedImportance = std::vector<ImportanceEntry>;

// Mean |phi| per feature as percentage shares, largest first (ties by
// feature index).
inline RankedImportance importance_ranking(const ShapMatrix& sm) {
  if (sm.rows() == 0) throw DataError("importance_ranking: empty matrix");
  const std::size_t d = sm.cols();
  RankedImportance out(d);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < sm.rows(); ++i) s += std::abs(sm.at(i, j));
    out[j].feature = sm.features[j];
    out[j].index = j;
    out[j].mean_abs = s / static_cast<double>(sm.rows());
    total += out[j].mean_abs;
  }
  for (auto& e : out) {
    e.share = total > 0.0 ? 100.0 * e.mean_abs / total
                          : 100.0 / static_cast<double>(d);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const ImportanceEntry& a, const ImportanceEntry& b) {
                     return a.mean_abs > b.mean_abs;
                   });
  return out;
}

inline Json to_json(const RankedImportance& r) {
  Json arr = Json::array();
  for (const auto& e : r) {
    arr.push_back({{"feature", e.feature},
                   {"mean_abs_shap", e.mean_abs},
                   {"share_percent", e.share}});
  }
  return arr;
}

// "mobile_interactions  16.72%"
inline std::string importance_report(const RankedImportance& r) {
  std::size_t width = 0;
  for (const auto& e : r) width = std::max(width, e.feature.size());
  std::string out;
  char buf[32];
  for (const auto& e : r) {
    std::snprintf(buf, sizeof(buf), "%.2f%%", e.share);
    out += e.feature;
    out.append(width - e.feature.size() + 2, ' ');
    out += buf;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// CART surrogate on SHAP values

struct CartConfig {
  std::size_t max_depth = 4;
  std::size_t min_leaf = 20;
  std::size_t cv_folds = 10;
  std::uint64_t seed = 0;
  double threshold = 0.5;  // ensemble class cut for fidelity
};

struct CartNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::size_t count0 = 0;
  std::size_t count1 = 0;
  int predicted = 0;

  bool is_leaf() const { return feature < 0; }
  std::size_t count() const { return count0 + count1; }
};

struct ExplanationTree {
  std::vector<std::string> features;
  std::vector<CartNode> nodes;  // nodes[0] is the root
  CartConfig config;
  double training_accuracy = 0.0;
  double fidelity = 0.0;  // agreement with the ensemble's predicted classes
  double cv_accuracy = 0.0;

  int predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(
          x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                : n.right);
    }
    return nodes[i].predicted;
  }

  std::size_t height() const {
    std::vector<std::size_t> depth(nodes.size(), 0);
    std::size_t h = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      h = std::max(h, depth[i]);
      if (!nodes[i].is_leaf()) {
        depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
        depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
      }
    }
    return h;
  }
};

namespace detail {

inline double gini(double c0, double c1) {
  const double n = c0 + c1;
  if (n == 0.0) return 0.0;
  const double p0 = c0 / n, p1 = c1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

class CartGrower {
 public:
  CartGrower(std::span<const double> x, std::size_t d,
             std::span<const std::uint8_t> y, const CartConfig& cfg)
      : x_(x), d_(d), y_(y), cfg_(cfg) {}

  std::vector<CartNode> grow(std::vector<std::size_t> rows) {
    nodes_.clear();
    build(rows, 0);
    return std::move(nodes_);
  }

 private:
  int build(std::vector<std::size_t>& rows, std::size_t depth) {
    CartNode node;
    for (auto r : rows) (y_[r] ? node.count1 : node.count0)++;
    node.predicted = node.count1 > node.count0 ? 1 : 0;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    const double n = static_cast<double>(rows.size());
    const double parent = gini(static_cast<double>(node.count0),
                               static_cast<double>(node.count1));
    if (depth >= cfg_.max_depth || parent == 0.0 ||
        rows.size() < 2 * std::max<std::size_t>(cfg_.min_leaf, 1)) {
      return id;
    }

    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = rows;
    const std::size_t min_leaf = std::max<std::size_t>(cfg_.min_leaf, 1);
    for (std::size_t j = 0; j < d_; ++j) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) {
                         return value(a, j) < value(b, j);
                       });
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t p = 0; p + 1 < sorted.size(); ++p) {
        (y_[sorted[p]] ? l1 : l0) += 1.0;
        const double lo = value(sorted[p], j);
        const double hi = value(sorted[p + 1], j);
        if (!(hi > lo)) continue;
        const std::size_t n_left = p + 1;
        if (n_left < min_leaf || sorted.size() - n_left < min_leaf) continue;
        const double r0 = static_cast<double>(node.count0) - l0;
        const double r1 = static_cast<double>(node.count1) - l1;
        const double nl = l0 + l1, nr = r0 + r1;
        const double gain =
            parent - (nl / n) * gini(l0, l1) - (nr / n) * gini(r0, r1);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          const double mid = lo + (hi - lo) / 2.0;
          best_threshold = mid < hi ? mid : lo;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (value(r, static_cast<std::size_t>(best_feature)) <= best_threshold
           ? left
           : right)
          .push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    auto& self = nodes_[static_cast<std::size_t>(id)];
    self.feature = best_feature;
    self.threshold = best_threshold;
    self.left = l;
    self.right = r;
    return id;
  }

  double value(std::size_t row, std::size_t j) const {
    return x_[row * d_ + j];
  }

  std::span<const double> x_;
  std::size_t d_;
  std::span<const std::uint8_t> y_;
  const CartConfig& cfg_;
  std::vector<CartNode> nodes_;
};

}  // namespace detail

// Gini CART with SHAP columns as predictors and `labels` as targets.
// Records training accuracy, fidelity to the ensemble's predicted classes
// (from the matrix margins) and stratified k-fold CV accuracy.
inline ExplanationTree fit_shap_cart(const ShapMatrix& sm,
                                     std::span<const std::uint8_t> labels,
                                     const CartConfig& cfg = {}) {
  const std::size_t n = sm.rows();
  if (labels.size() != n) {
    throw DataError("fit_shap_cart: label count differs from SHAP rows");
  }
  std::size_t positives = 0;
  for (auto y : labels) positives += y;
  if (positives == 0 || positives == n) {
    throw DataError("fit_shap_cart: labels contain a single class");
  }

  ExplanationTree tree;
  tree.features = sm.features;
  tree.config = cfg;
  detail::CartGrower grower(sm.phi, sm.cols(), labels, cfg);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  tree.nodes = grower.grow(all);

  std::size_t correct = 0, agree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int pred = tree.predict(sm.row(i));
    correct += pred == labels[i];
    const int model_class = sigmoid(sm.margins[i]) >= cfg.threshold ? 1 : 0;
    agree += pred == model_class;
  }
  tree.training_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  tree.fidelity = static_cast<double>(agree) / static_cast<double>(n);

  const std::size_t k = std::min(cfg.cv_folds, n);
  if (k >= 2) {
    FeatureSchema schema;
    schema.names = sm.features;
    schema.kinds.assign(sm.cols(), FeatureKind::continuous);
    const Dataset view(schema, sm.phi,
                       std::vector<std::uint8_t>(labels.begin(), labels.end()));
    const auto plan = stratified_kfold(view, k, derive_seed(cfg.seed, "cart"));
    double acc_sum = 0.0;
    for (std::size_t f = 0; f < k; ++f) {
      const auto fold_tree = grower.grow(plan.train_indices(f));
      ExplanationTree probe;
      probe.nodes = fold_tree;
      const auto test = plan.test_indices(f);
      std::size_t ok = 0;
      for (auto i : test) ok += probe.predict(sm.row(i)) == labels[i];
      acc_sum += static_cast<double>(ok) / static_cast<double>(test.size());
    }
    tree.cv_accuracy = acc_sum / static_cast<double>(k);
  }
  return tree;
}

struct RuleCondition {
  std::size_t feature = 0;
  bool less_equal = true;  // phi <= threshold, otherwise phi > threshold
  double threshold = 0.0;
};

struct Rule {
  std::vector<RuleCondition> conditions;
  int predicted = 0;
  double purity = 0.0;
  std::size_t coverage = 0;
};

// One rule per leaf, in left-to-right order; coverages partition the
// training rows.
inline std::vector<Rule> extract_rules(const ExplanationTree& t) {
  std::vector<Rule> rules;
  std::vector<RuleCondition> path;
  auto walk = [&](auto&& self, std::size_t i) -> void {
    const auto& n = t.nodes[i];
    if (n.is_leaf()) {
      Rule r;
      r.conditions = path;
      r.predicted = n.predicted;
      r.coverage = n.count();
      const std::size_t majority = n.predicted ? n.count1 : n.count0;
      r.purity = n.count() ? static_cast<double>(majority) /
                                 static_cast<double>(n.count())
                           : 0.0;
      rules.push_back(std::move(r));
      return;
    }
    const auto f = static_cast<std::size_t>(n.feature);
    path.push_back({f, true, n.threshold});
    self(self, static_cast<std::size_t>(n.left));
    path.back().less_equal = false;
    self(self, static_cast<std::size_t>(n.right));
    path.pop_back();
  };
  walk(walk, 0);
  return rules;
}

inline std::string format_threshold(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

// "IF phi(credit_value_total) <= 0.069 THEN class=0 (purity 0.97, coverage 812)"
inline std::string rule_text(const Rule& r,
                             const std::vector<std::string>& features) {
  std::string s = "IF ";
  if (r.conditions.empty()) s += "TRUE";
  for (std::size_t c = 0; c < r.conditions.size(); ++c) {
    const auto& cond = r.conditions[c];
    if (c) s += " AND ";
    s += "phi(" + features[cond.feature] + ")";
    s += cond.less_equal ? " <= " : " > ";
    s += format_threshold(cond.threshold);
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), " THEN class=%d (purity %.2f, coverage %zu)",
                r.predicted, r.purity, r.coverage);
  return s + buf;
}

inline Json to_json(const ExplanationTree& t) {
  auto node_json = [&](auto&& self, std::size_t i) -> Json {
    const auto& n = t.nodes[i];
    Json j = {{"count0", n.count0}, {"count1", n.count1},
              {"class", n.predicted}};
    if (!n.is_leaf()) {
      j["feature"] = t.features[static_cast<std::size_t>(n.feature)];
      j["threshold"] = n.threshold;
      j["left"] = self(self, static_cast<std::size_t>(n.left));
      j["right"] = self(self, static_cast<std::size_t>(n.right));
    }
    return j;
  };
  return {{"predictors", "shap"},
          {"max_depth", t.config.max_depth},
          {"min_leaf", t.config.min_leaf},
          {"cv_folds", t.config.cv_folds},
          {"training_accuracy", t.training_accuracy},
          {"fidelity", t.fidelity},
          {"cv_accuracy", t.cv_accuracy},
          {"tree", node_json(node_json, 0)}};
}

inline Json to_json(const std::vector<Rule>& rules,
                    const std::vector<std::string>& features) {
  Json arr = Json::array();
  for (const auto& r : rules) {
    Json conds = Json::array();
    for (const auto& c : r.conditions) {
      conds.push_back({{"feature", features[c.feature]},
                       {"op", c.less_equal ? "<=" : ">"},
                       {"threshold", c.threshold}});
    }
    arr.push_back({{"conditions", conds},
                   {"class", r.predicted},
                   {"purity", r.purity},
                   {"coverage", r.coverage},
                   {"text", rule_text(r, features)}});
  }
  return arr;
}

}  // namespace obprop

#endif  // OBPROP_EXPLAIN_HPP_
