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


#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "obprop/explain.hpp"

namespace obprop {
namespace {

FeatureSchema continuous_schema(std::size_t d) {
  FeatureSchema s;
  for (std::size_t j = 0; j < d; ++j) {
    s.names.push_back("f" + std::to_string(j));
    s.kinds.push_back(FeatureKind::continuous);
  }
  return s;
}

// Random tree with consistent covers; thresholds sit on a coarse grid so rows
// can land exactly on them.
int grow_random(RegressionTree& t, std::mt19937_64& rng, std::size_t d,
                std::size_t depth, std::size_t max_depth) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (depth == max_depth || (depth > 0 && u01(rng) < 0.25)) {
    t.nodes[id].value = 2.0 * u01(rng) - 1.0;
    t.nodes[id].cover = 0.5 + 10.0 * u01(rng);
    return id;
  }
  const int feature = static_cast<int>(rng() % d);
  const double threshold = static_cast<double>(rng() % 9) / 8.0;
  const int l = grow_random(t, rng, d, depth + 1, max_depth);
  const int r = grow_random(t, rng, d, depth + 1, max_depth);
  auto& n = t.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = l;
  n.right = r;
  n.cover = t.nodes[static_cast<std::size_t>(l)].cover +
            t.nodes[static_cast<std::size_t>(r)].cover;
  return id;
}

GradientBoostedEnsemble random_ensemble(std::mt19937_64& rng, std::size_t d,
                                        std::size_t trees,
                                        std::size_t max_depth) {
  GradientBoostedEnsemble m;
  m.schema = continuous_schema(d);
  m.base_margin = -1.5;
  for (std::size_t t = 0; t < trees; ++t) {
    RegressionTree tree;
    grow_random(tree, rng, d, 0, max_depth);
    m.trees.push_back(std::move(tree));
  }
  return m;
}

std::vector<double> random_row(std::mt19937_64& rng, std::size_t d) {
  std::vector<double> row(d);
  for (auto& v : row) v = static_cast<double>(rng() % 17) / 16.0;
  return row;
}

// Independent reference: v(S) by recursive cover-weighted averaging, then the
// Shapley sum over all subsets with factorial weights.
double v_of(const RegressionTree& t, const std::vector<double>& x,
            const std::vector<bool>& in_s, std::size_t i) {
  const auto& n = t.nodes[i];
  if (n.is_leaf()) return n.value;
  const auto l = static_cast<std::size_t>(n.left);
  const auto r = static_cast<std::size_t>(n.right);
  if (in_s[static_cast<std::size_t>(n.feature)]) {
    return v_of(t, x, in_s, x[static_cast<std::size_t>(n.feature)] <=
                                    n.threshold
                                ? l
                                : r);
  }
  return (t.nodes[l].cover * v_of(t, x, in_s, l) +
          t.nodes[r].cover * v_of(t, x, in_s, r)) /
         n.cover;
}

std::vector<double> shapley_reference(const GradientBoostedEnsemble& m,
                                      const std::vector<double>& x) {
  const std::size_t d = x.size();
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> v(std::size_t{1} << d, 0.0);
  for (std::size_t s = 0; s < v.size(); ++s) {
    std::vector<bool> in_s(d);
    for (std::size_t j = 0; j < d; ++j) in_s[j] = (s >> j) & 1;
    for (const auto& t : m.trees) v[s] += v_of(t, x, in_s, 0);
  }
  std::vector<double> phi(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t s = 0; s < v.size(); ++s) {
      if ((s >> j) & 1) continue;
      const auto k = static_cast<std::size_t>(std::popcount(s));
      phi[j] += fact[k] * fact[d - k - 1] / fact[d] * (v[s | (1u << j)] - v[s]);
    }
  }
  return phi;
}

TEST(TreeShap, MatchesExactShapleyOnRandomEnsembles) {
  std::mt19937_64 rng(2026);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t d = 2 + rng() % 6;
    const auto m = random_ensemble(rng, d, 1 + rng() % 4, 1 + rng() % 5);
    for (int i = 0; i < 5; ++i) {
      const auto x = random_row(rng, d);
      const auto fast = tree_shap(m, x);
      const auto lib = exact_shapley_oracle(m, x);
      const auto ref = shapley_reference(m, x);
      for (std::size_t j = 0; j < d; ++j) {
        ASSERT_NEAR(fast.phi[j], ref[j], 1e-9) << rep << ' ' << j;
        ASSERT_NEAR(lib.phi[j], ref[j], 1e-9) << rep << ' ' << j;
      }
    }
  }
}

TEST(TreeShap, RepeatedFeatureOnPath) {
  // x0 split twice on the same path.
  RegressionTree t;
  t.nodes = {{0, 0.5, 1, 2, 10.0, 0.0}, {0, 0.25, 3, 4, 6.0, 0.0},
             {1, 0.5, 5, 6, 4.0, 0.0},  {-1, 0, -1, -1, 2.0, 1.0},
             {-1, 0, -1, -1, 4.0, -2.0}, {-1, 0, -1, -1, 1.0, 3.0},
             {-1, 0, -1, -1, 3.0, 0.5}};
  GradientBoostedEnsemble m;
  m.schema = continuous_schema(2);
  m.trees.push_back(t);
  for (double a : {0.1, 0.3, 0.7}) {
    for (double b : {0.2, 0.9}) {
      const std::vector<double> x{a, b};
      const auto fast = tree_shap(m, x);
      const auto ref = shapley_reference(m, x);
      EXPECT_NEAR(fast.phi[0], ref[0], 1e-12);
      EXPECT_NEAR(fast.phi[1], ref[1], 1e-12);
    }
  }
}

TEST(TreeShap, AdditivityOnTrainedModel) {
  const auto ds = generate_synthetic(default_generator_config(2000, 0.05, 4));
  BoostParams p;
  p.n_trees = 40;
  p.max_depth = 5;
  const auto m = train(ds, p, 3);
  const auto sm = shap_matrix(m, ds);
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const auto row = sm.row(i);
    const double sum = std::accumulate(row.begin(), row.end(), sm.base_value);
    ASSERT_NEAR(sum, m.predict_margin(ds.row(i)), 1e-9);
    ASSERT_DOUBLE_EQ(sm.margins[i], m.predict_margin(ds.row(i)));
  }
  const auto one = tree_shap(m, ds.row(17));
  for (std::size_t j = 0; j < ds.cols(); ++j) {
    EXPECT_NEAR(one.phi[j], sm.at(17, j), 1e-12);
  }
  EXPECT_NEAR(one.base_value, sm.base_value, 1e-15);
}

TEST(TreeShap, ShapMatrixIndependentOfThreads) {
  const auto ds = generate_synthetic(default_generator_config(1500, 0.05, 6));
  BoostParams p;
  p.n_trees = 10;
  const auto m = train(ds, p, 1);
  const auto a = shap_matrix(m, ds, 1);
  const auto b = shap_matrix(m, ds, 3);
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.margins, b.margins);
}

TEST(TreeShap, SingleLeafTreesGiveZero) {
  GradientBoostedEnsemble m;
  m.schema = continuous_schema(3);
  m.base_margin = 0.2;
  RegressionTree t;
  t.nodes.push_back({-1, 0.0, -1, -1, 5.0, 0.7});
  m.trees = {t, t};
  const auto r = tree_shap(m, std::vector<double>{1, 2, 3});
  for (double v : r.phi) EXPECT_EQ(v, 0.0);
  EXPECT_NEAR(r.base_value, 1.6, 1e-15);
  EXPECT_NEAR(r.margin, 1.6, 1e-15);
}

TEST(TreeShap, DummyFeatureGetsZero) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    auto m = random_ensemble(rng, 4, 3, 4);
    for (auto& t : m.trees) {
      for (auto& n : t.nodes) {
        if (n.feature == 3) n.feature = 0;
      }
    }
    const auto r = tree_shap(m, random_row(rng, 4));
    EXPECT_EQ(r.phi[3], 0.0);
  }
}

TEST(TreeShap, PermutationEquivariance) {
  std::mt19937_64 rng(9);
  const std::vector<int> perm{2, 0, 3, 1};  // old feature j -> perm[j]
  for (int rep = 0; rep < 20; ++rep) {
    const auto m = random_ensemble(rng, 4, 3, 4);
    auto pm = m;
    for (auto& t : pm.trees) {
      for (auto& n : t.nodes) {
        if (!n.is_leaf()) n.feature = perm[static_cast<std::size_t>(n.feature)];
      }
    }
    const auto x = random_row(rng, 4);
    std::vector<double> px(4);
    for (std::size_t j = 0; j < 4; ++j) px[static_cast<std::size_t>(perm[j])] = x[j];
    const auto a = tree_shap(m, x);
    const auto b = tree_shap(pm, px);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(a.phi[j], b.phi[static_cast<std::size_t>(perm[j])], 1e-12);
    }
  }
}

TEST(TreeShap, LinearAcrossTrees) {
  std::mt19937_64 rng(10);
  const auto a = random_ensemble(rng, 5, 3, 4);
  const auto b = random_ensemble(rng, 5, 2, 3);
  auto ab = a;
  ab.trees.insert(ab.trees.end(), b.trees.begin(), b.trees.end());
  const auto x = random_row(rng, 5);
  const auto pa = tree_shap(a, x), pb = tree_shap(b, x), pab = tree_shap(ab, x);
  for (std::size_t j = 0; j < 5; ++j) {
    EXPECT_NEAR(pab.phi[j], pa.phi[j] + pb.phi[j], 1e-12);
  }
}

TEST(TreeShap, Errors) {
  std::mt19937_64 rng(11);
  auto m = random_ensemble(rng, 3, 1, 2);
  EXPECT_THROW(tree_shap(m, std::vector<double>{0.0, 1.0}), DataError);
  m.trees[0].nodes[0].cover = 0.0;
  EXPECT_THROW(tree_shap(m, std::vector<double>{0, 0, 0}), DataError);
  auto wide = random_ensemble(rng, 13, 1, 2);
  EXPECT_THROW(exact_shapley_oracle(wide, std::vector<double>(13, 0.0)),
               ConfigError);
}

ShapMatrix matrix_from(std::vector<std::string> features,
                       std::vector<double> phi, std::vector<double> margins) {
  ShapMatrix sm;
  sm.features = std::move(features);
  sm.phi = std::move(phi);
  sm.margins = std::move(margins);
  return sm;
}

TEST(Importance, SharesAndOrdering) {
  const auto sm = matrix_from({"a", "b", "c"},
                              {0.1, -0.6, 0.0, -0.3, 0.2, 0.0}, {0.0, 0.0});
  const auto r = importance_ranking(sm);
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].feature, "b");
  EXPECT_EQ(r[1].feature, "a");
  EXPECT_EQ(r[2].feature, "c");
  EXPECT_NEAR(r[0].mean_abs, 0.4, 1e-15);
  EXPECT_NEAR(r[0].share, 200.0 / 3.0, 1e-12);
  EXPECT_NEAR(r[0].share + r[1].share + r[2].share, 100.0, 1e-12);
  EXPECT_EQ(importance_report(r).substr(0, 10), "b  66.67%\n");
  const auto j = to_json(r);
  EXPECT_EQ(j[0].at("feature"), "b");

  const auto zero = importance_ranking(matrix_from({"x", "y"}, {0, 0}, {0}));
  EXPECT_EQ(zero[0].feature, "x");
  EXPECT_DOUBLE_EQ(zero[0].share, 50.0);
}

TEST(Importance, SharesSumToHundredOnModel) {
  const auto ds = generate_synthetic(default_generator_config(1500, 0.05, 2));
  BoostParams p;
  p.n_trees = 20;
  const auto sm = shap_matrix(train(ds, p, 2), ds);
  double total = 0.0;
  const auto r = importance_ranking(sm);
  for (std::size_t i = 0; i < r.size(); ++i) {
    total += r[i].share;
    if (i) {
      EXPECT_GE(r[i - 1].mean_abs, r[i].mean_abs);
    }
  }
  EXPECT_NEAR(total, 100.0, 1e-9);
}

TEST(ShapCsv, HeaderAndRows) {
  const auto sm = matrix_from({"a", "b"}, {0.5, -0.25}, {1.0});
  std::ostringstream out;
  write_shap_csv(sm, out);
  EXPECT_EQ(out.str(), "a,b,base_value,margin\n0.5,-0.25,0,1\n");
}

TEST(ShapCart, SeparableColumnGivesDepthOneTree) {
  std::vector<double> phi;
  std::vector<double> margins;
  std::vector<std::uint8_t> y;
  for (int i = 0; i < 200; ++i) {
    const bool pos = i % 4 == 0;
    phi.push_back(pos ? 1.0 + 0.001 * i : -1.0 - 0.001 * i);
    phi.push_back(std::sin(i));
    margins.push_back(pos ? 2.0 : -2.0);
    y.push_back(pos);
  }
  const auto sm = matrix_from({"a", "b"}, phi, margins);
  CartConfig cfg;
  cfg.min_leaf = 5;
  const auto t = fit_shap_cart(sm, y, cfg);
  EXPECT_EQ(t.height(), 1u);
  EXPECT_EQ(t.nodes[0].feature, 0);
  EXPECT_GT(t.nodes[0].threshold, -1.2);
  EXPECT_LT(t.nodes[0].threshold, 1.0);
  EXPECT_DOUBLE_EQ(t.training_accuracy, 1.0);
  EXPECT_DOUBLE_EQ(t.fidelity, 1.0);
  EXPECT_DOUBLE_EQ(t.cv_accuracy, 1.0);

  const auto rules = extract_rules(t);
  ASSERT_EQ(rules.size(), 2u);
  EXPECT_EQ(rules[0].predicted, 0);
  EXPECT_EQ(rules[0].coverage, 150u);
  EXPECT_EQ(rules[1].coverage, 50u);
  EXPECT_DOUBLE_EQ(rules[1].purity, 1.0);
  EXPECT_EQ(rule_text(rules[1], t.features).rfind("IF phi(a) > ", 0), 0u);
  EXPECT_NE(rule_text(rules[1], t.features)
                .find("THEN class=1 (purity 1.00, coverage 50)"),
            std::string::npos);
}

TEST(ShapCart, DepthZeroIsSingleLeaf) {
  const auto sm =
      matrix_from({"a"}, {0.1, 0.2, 0.3, 0.4, 0.5}, {-1, -1, 1, 1, 1});
  const std::vector<std::uint8_t> y{0, 0, 1, 1, 1};
  CartConfig cfg;
  cfg.max_depth = 0;
  cfg.min_leaf = 1;
  cfg.cv_folds = 2;
  const auto t = fit_shap_cart(sm, y, cfg);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.nodes[0].predicted, 1);
  const auto rules = extract_rules(t);
  ASSERT_EQ(rules.size(), 1u);
  EXPECT_EQ(rule_text(rules[0], t.features),
            "IF TRUE THEN class=1 (purity 0.60, coverage 5)");
}

TEST(ShapCart, MajorityTieGoesToClassZero) {
  const auto sm = matrix_from({"a"}, {0.0, 0.0, 0.0, 0.0}, {0, 0, 0, 0});
  const std::vector<std::uint8_t> y{1, 0, 1, 0};
  CartConfig cfg;
  cfg.min_leaf = 1;
  cfg.cv_folds = 0;
  EXPECT_EQ(fit_shap_cart(sm, y, cfg).nodes[0].predicted, 0);
}

TEST(ShapCart, RulesPartitionRowsAndRespectLimits) {
  const auto ds = generate_synthetic(default_generator_config(3000, 0.05, 13));
  BoostParams p;
  p.n_trees = 30;
  const auto m = train(ds, p, 13);
  const auto sm = shap_matrix(m, ds);
  CartConfig cfg;
  cfg.max_depth = 3;
  cfg.min_leaf = 15;
  cfg.cv_folds = 5;
  const auto t = fit_shap_cart(sm, ds.labels(), cfg);
  EXPECT_LE(t.height(), 3u);
  const auto rules = extract_rules(t);
  std::size_t covered = 0;
  for (const auto& r : rules) {
    covered += r.coverage;
    EXPECT_GE(r.coverage, 15u);
    EXPECT_GE(r.purity, 0.5);
  }
  EXPECT_EQ(covered, ds.rows());
  // Every row satisfies exactly one rule, and that rule's class is the
  // tree's prediction.
  for (std::size_t i = 0; i < ds.rows(); i += 7) {
    const auto x = sm.row(i);
    int matches = 0, cls = -1;
    for (const auto& r : rules) {
      const bool ok = std::all_of(
          r.conditions.begin(), r.conditions.end(), [&](const auto& c) {
            return c.less_equal ? x[c.feature] <= c.threshold
                                : x[c.feature] > c.threshold;
          });
      if (ok) {
        ++matches;
        cls = r.predicted;
      }
    }
    ASSERT_EQ(matches, 1);
    EXPECT_EQ(cls, t.predict(x));
  }
  EXPECT_GT(t.cv_accuracy, 0.9);
  const auto j = to_json(t);
  EXPECT_TRUE(j.contains("fidelity"));
  EXPECT_THROW(fit_shap_cart(sm, std::vector<std::uint8_t>(ds.rows(), 0), cfg),
               DataError);
}

}  // namespace
}  // namespace obprop
