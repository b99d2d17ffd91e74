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

// Gradient-boosted regression trees under the logistic loss, grown with
// exact greedy second-order splits.

#ifndef OBPROP_GBT_HPP_
#define OBPROP_GBT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "obprop/common.hpp"
#include "obprop/data.hpp"

namespace obprop {

struct BoostParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;      // eta, applied to stored leaf weights
  double min_split_gain = 0.0;     // gamma
  double l2_reg = 1.0;             // lambda
  double min_child_hessian = 1.0;

  void validate() const {
    if (max_depth < 1) throw ConfigError("boost: max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw ConfigError("boost: learning_rate must lie in (0,1]");
    }
    if (!(min_split_gain >= 0.0)) {
      throw ConfigError("boost: min_split_gain must be >= 0");
    }
    if (!(l2_reg >= 0.0)) throw ConfigError("boost: l2_reg must be >= 0");
    if (!(min_child_hessian >= 0.0)) {
      throw ConfigError("boost: min_child_hessian must be >= 0");
    }
  }

  bool operator==(const BoostParams&) const = default;
};

// A node is a leaf when `feature` is negative. Children are indices into the
// owning tree's node array.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double cover = 0.0;  // sum of training hessians routed here
  double value = 0.0;  // leaf weight, learning rate already applied

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // Values equal to the threshold go left.
  std::size_t leaf_index(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(
          row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                  : n.right);
    }
    return i;
  }

  double predict(std::span<const double> row) const {
    return nodes[leaf_index(row)].value;
  }

  std::size_t height() const { return height_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(
        nodes.begin(), nodes.end(), [](const TreeNode& n) {
          return n.is_leaf();
        }));
  }

 private:
  std::size_t height_from(std::size_t i) const {
    const auto& n = nodes[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(height_from(static_cast<std::size_t>(n.left)),
                        height_from(static_cast<std::size_t>(n.right)));
  }
};

struct GradientBoostedEnsemble {
  std::vector<RegressionTree> trees;
  double base_margin = 0.0;
  BoostParams params;
  FeatureSchema schema;
  std::uint64_t seed = 0;

  void check_width(std::size_t width) const {
    if (width != schema.size()) {
      throw DataError("model expects " + std::to_string(schema.size()) +
                      " features, got " + std::to_string(width));
    }
  }

  double predict_margin(std::span<const double> row) const {
    check_width(row.size());
    double m = base_margin;
    for (const auto& t : trees) m += t.predict(row);
    return m;
  }

  double predict_proba(std::span<const double> row) const {
    return sigmoid(predict_margin(row));
  }

  std::vector<double> predict_margin(const Dataset& ds) const {
    if (ds.schema().names != schema.names) {
      throw DataError("dataset columns do not match the model schema");
    }
    std::vector<double> out(ds.rows());
    for (std::size_t i = 0; i < ds.rows(); ++i) {
      out[i] = predict_margin(ds.row(i));
    }
    return out;
  }

  std::vector<double> predict_proba(const Dataset& ds) const {
    auto m = predict_margin(ds);
    for (auto& v : m) v = sigmoid(v);
    return m;
  }
};

// Gradient and hessian of the logistic loss -[y log p + (1-y) log(1-p)]
// with respect to the margin.
inline std::pair<std::vector<double>, std::vector<double>> grad_hess_logistic(
    std::span<const std::uint8_t> labels, std::span<const double> margins) {
  if (labels.size() != margins.size()) {
    throw ConfigError("grad_hess_logistic: length mismatch");
  }
  std::vector<double> g(labels.size()), h(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = sigmoid(margins[i]);
    g[i] = p - static_cast<double>(labels[i]);
    h[i] = p * (1.0 - p);
  }
  return {std::move(g), std::move(h)};
}

inline double logistic_loss(std::span<const std::uint8_t> labels,
                            std::span<const double> margins) {
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double m = margins[i];
    // log(1 + e^m) - y m, written to stay finite for large |m|.
    const double softplus =
        m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
    total += softplus - (labels[i] ? m : 0.0);
  }
  return total;
}

// Reusable exact-greedy tree grower. Feature columns are presorted once; each
// tree works on a copy of the sorted (value, row) lists, stably partitioned in
// place as nodes split, so every node owns the same contiguous range in each
// list.
class TreeBuilder {
 public:
  // `values` is row-major with `cols` columns.
  TreeBuilder(std::span<const double> values, std::size_t cols)
      : n_(cols ? values.size() / cols : 0), d_(cols) {
    if (n_ == 0 || d_ == 0) throw DataError("fit_tree: empty input");
    sorted_.resize(n_ * d_);
    std::vector<std::uint32_t> order(n_);
    for (std::size_t j = 0; j < d_; ++j) {
      std::iota(order.begin(), order.end(), 0u);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::uint32_t a, std::uint32_t b) {
                         return values[a * d_ + j] < values[b * d_ + j];
                       });
      Entry* list = sorted_.data() + j * n_;
      for (std::size_t p = 0; p < n_; ++p) {
        list[p] = {values[order[p] * d_ + j], order[p]};
      }
    }
    go_left_.resize(n_);
    scratch_.resize(n_);
    gh_.resize(n_);
  }

  std::size_t rows() const { return n_; }

  // Grows one tree. When `margins` is nonempty, each training row's leaf
  // value is added to it.
  RegressionTree build(std::span<const double> grad,
                       std::span<const double> hess, const BoostParams& params,
                       std::span<double> margins = {}) {
    if (grad.size() != n_ || hess.size() != n_) {
      throw ConfigError("fit_tree: gradients/hessians misaligned with rows");
    }
    params.validate();
    for (std::size_t i = 0; i < n_; ++i) gh_[i] = {grad[i], hess[i]};
    params_ = &params;
    margins_ = margins;
    work_ = sorted_;
    RegressionTree tree;
    tree.nodes.reserve(64);
    grow(tree, 0, n_, 0);
    return tree;
  }

 private:
  struct Entry {
    double value;
    std::uint32_t row;
  };
  struct GradHess {
    double g, h;
  };
  struct Split {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
  };

  const Entry* list(std::size_t j) const { return work_.data() + j * n_; }

  static double split_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
  }

  Split best_split(std::size_t begin, std::size_t end, double g_sum,
                   double h_sum) const {
    const double lambda = params_->l2_reg;
    const double mch = params_->min_child_hessian;
    const double parent = g_sum * g_sum / (h_sum + lambda);
    Split best;
    for (std::size_t j = 0; j < d_; ++j) {
      const Entry* e = list(j);
      double gl = 0.0, hl = 0.0;
      for (std::size_t p = begin; p + 1 < end; ++p) {
        const auto& gh = gh_[e[p].row];
        gl += gh.g;
        hl += gh.h;
        const double xv = e[p].value;
        const double xn = e[p + 1].value;
        if (!(xn > xv)) continue;
        const double hr = h_sum - hl;
        if (hl < mch || hr < mch) continue;
        if (hl + lambda <= 0.0 || hr + lambda <= 0.0) continue;
        const double gr = g_sum - gl;
        const double gain = 0.5 * (gl * gl / (hl + lambda) +
                                   gr * gr / (hr + lambda) - parent) -
                            params_->min_split_gain;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<int>(j);
          best.threshold = split_threshold(xv, xn);
        }
      }
    }
    return best;
  }

  int grow(RegressionTree& tree, std::size_t begin, std::size_t end,
           std::size_t depth) {
    const Entry* rows = list(0);
    double g_sum = 0.0, h_sum = 0.0;
    for (std::size_t p = begin; p < end; ++p) {
      const auto& gh = gh_[rows[p].row];
      g_sum += gh.g;
      h_sum += gh.h;
    }
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    Split split;
    if (depth < params_->max_depth && end - begin >= 2) {
      split = best_split(begin, end, g_sum, h_sum);
    }
    if (split.feature < 0) {
      const double denom = h_sum + params_->l2_reg;
      const double w =
          denom > 0.0 ? -g_sum / denom * params_->learning_rate : 0.0;
      auto& leaf = tree.nodes[static_cast<std::size_t>(id)];
      leaf.value = w;
      leaf.cover = h_sum;
      if (!margins_.empty()) {
        for (std::size_t p = begin; p < end; ++p) margins_[rows[p].row] += w;
      }
      return id;
    }

    const auto f = static_cast<std::size_t>(split.feature);
    std::size_t n_left = 0;
    const Entry* split_list = list(f);
    for (std::size_t p = begin; p < end; ++p) {
      const bool left = split_list[p].value <= split.threshold;
      go_left_[split_list[p].row] = left;
      n_left += left;
    }
    for (std::size_t j = 0; j < d_; ++j) {
      Entry* e = work_.data() + j * n_;
      std::size_t l = begin, s = 0;
      for (std::size_t p = begin; p < end; ++p) {
        if (go_left_[e[p].row]) {
          e[l++] = e[p];
        } else {
          scratch_[s++] = e[p];
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + static_cast<long>(s),
                e + l);
    }

    const std::size_t mid = begin + n_left;
    const int left = grow(tree, begin, mid, depth + 1);
    const int right = grow(tree, mid, end, depth + 1);
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    node.cover = tree.nodes[static_cast<std::size_t>(left)].cover +
                 tree.nodes[static_cast<std::size_t>(right)].cover;
    return id;
  }

  std::size_t n_;
  std::size_t d_;
  std::vector<Entry> sorted_;  // per-feature presorted (value, row)
  std::vector<Entry> work_;
  std::vector<std::uint8_t> go_left_;
  std::vector<Entry> scratch_;
  std::vector<GradHess> gh_;
  std::span<double> margins_;
  const BoostParams* params_ = nullptr;
};

// Fits one regression tree to (gradient, hessian) pairs. `features` is
// row-major with `cols` columns.
inline RegressionTree fit_tree(std::span<const double> features,
                               std::size_t cols, std::span<const double> grad,
                               std::span<const double> hess,
                               const BoostParams& params) {
  TreeBuilder builder(features, cols);
  return builder.build(grad, hess, params);
}

// Boosts params.n_trees trees from the training prevalence log-odds. When
// `loss_trace` is given it receives the training loss before the first tree
// and after every round.
inline GradientBoostedEnsemble train(const Dataset& ds,
                                     const BoostParams& params,
                                     std::uint64_t seed = 0,
                                     std::vector<double>* loss_trace =
                                         nullptr) {
  params.validate();
  ds.require_both_classes("train");
  const auto counts = ds.class_counts();
  const double p = static_cast<double>(counts.positives) /
                   static_cast<double>(counts.total());

  GradientBoostedEnsemble model;
  model.params = params;
  model.schema = ds.schema();
  model.seed = seed;
  model.base_margin = std::log(p / (1.0 - p));

  std::vector<double> margins(ds.rows(), model.base_margin);
  const auto& labels = ds.labels();
  if (loss_trace) loss_trace->push_back(logistic_loss(labels, margins));
  if (params.n_trees == 0) return model;

  TreeBuilder builder(ds.values(), ds.cols());
  model.trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    auto [g, h] = grad_hess_logistic(labels, margins);
    model.trees.push_back(builder.build(g, h, params, margins));
    if (loss_trace) loss_trace->push_back(logistic_loss(labels, margins));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Serialization

inline Json to_json(const BoostParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"learning_rate", p.learning_rate},
          {"min_split_gain", p.min_split_gain},
          {"l2_reg", p.l2_reg},
          {"min_child_hessian", p.min_child_hessian}};
}

inline BoostParams boost_params_from_json(const Json& j) {
  BoostParams p;
  p.n_trees = j.at("n_trees").get<std::size_t>();
  p.max_depth = j.at("max_depth").get<std::size_t>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.min_split_gain = j.at("min_split_gain").get<double>();
  p.l2_reg = j.at("l2_reg").get<double>();
  p.min_child_hessian = j.at("min_child_hessian").get<double>();
  return p;
}

namespace detail {

inline Json node_to_json(const RegressionTree& tree,
                                           std::size_t i) {
  const auto& n = tree.nodes[i];
  if (n.is_leaf()) return {{"leaf", n.value}, {"cover", n.cover}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"cover", n.cover},
          {"left", node_to_json(tree, static_cast<std::size_t>(n.left))},
          {"right", node_to_json(tree, static_cast<std::size_t>(n.right))}};
}

inline int node_from_json(const Json& j, RegressionTree& tree,
                          std::size_t n_features) {
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  TreeNode node;
  node.cover = j.at("cover").get<double>();
  if (j.contains("leaf")) {
    node.value = j.at("leaf").get<double>();
    tree.nodes[static_cast<std::size_t>(id)] = node;
    return id;
  }
  node.feature = j.at("feature").get<int>();
  if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features) {
    throw DataError("model: split feature index out of range");
  }
  node.threshold = j.at("threshold").get<double>();
  node.left = node_from_json(j.at("left"), tree, n_features);
  node.right = node_from_json(j.at("right"), tree, n_features);
  tree.nodes[static_cast<std::size_t>(id)] = node;
  return id;
}

}  // namespace detail

inline Json to_json(const GradientBoostedEnsemble& model) {
  Json trees = Json::array();
  for (const auto& t : model.trees) trees.push_back(detail::node_to_json(t, 0));
  return {{"base_margin", model.base_margin},
          {"seed", model.seed},
          {"params", to_json(model.params)},
          {"schema", schema_to_json(model.schema)},
          {"trees", trees}};
}

inline GradientBoostedEnsemble ensemble_from_json(const Json& j) {
  GradientBoostedEnsemble model;
  try {
    model.base_margin = j.at("base_margin").get<double>();
    model.seed = j.value("seed", std::uint64_t{0});
    model.params = boost_params_from_json(j.at("params"));
    model.schema = schema_from_json(j.at("schema"));
    for (const auto& t : j.at("trees")) {
      RegressionTree tree;
      detail::node_from_json(t, tree, model.schema.size());
      model.trees.push_back(std::move(tree));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model: malformed JSON: ") + e.what());
  }
  return model;
}

}  // namespace obprop

#endif  // OBPROP_GBT_HPP_
