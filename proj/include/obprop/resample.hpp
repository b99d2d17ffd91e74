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

// Class rebalancing: ADASYN oversampling of the rare class (label 1),
// NearMiss undersampling of the majority class, and two-sample
// Kolmogorov-Smirnov audits of the distributions before and after.

#ifndef OBPROP_RESAMPLE_HPP_
#define OBPROP_RESAMPLE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "obprop/common.hpp"
#include "obprop/data.hpp"

namespace obprop {

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Survival function of the asymptotic Kolmogorov distribution, P(K > x).
// Uses the theta-function form below x = 1 where the alternating series
// converges slowly; both series stop once a term drops below 1e-12.
inline double kolmogorov_survival(double x) {
  if (!(x > 0.0)) return 1.0;
  constexpr double kTol = 1e-12;
  double p = 0.0;
  if (x < 1.0) {
    constexpr double pi2 = std::numbers::pi * std::numbers::pi;
    const double w = std::sqrt(2.0 * std::numbers::pi) / x;
    double cdf = 0.0;
    for (int j = 1; j < 10000; ++j) {
      const double odd = 2.0 * j - 1.0;
      const double term = w * std::exp(-odd * odd * pi2 / (8.0 * x * x));
      cdf += term;
      if (term < kTol) break;
    }
    p = 1.0 - cdf;
  } else {
    double sign = 1.0;
    for (int j = 1; j < 10000; ++j) {
      const double term = std::exp(-2.0 * j * j * x * x);
      p += sign * term;
      if (term < kTol) break;
      sign = -sign;
    }
    p *= 2.0;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline KsResult ks_two_sample(std::span<const double> a,
                              std::span<const double> b) {
  if (a.empty() || b.empty()) {
    throw DataError("ks_two_sample: both samples must be nonempty");
  }
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double n1 = static_cast<double>(sa.size());
  const double n2 = static_cast<double>(sb.size());

  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < sa.size() || j < sb.size()) {
    double v;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      v = sa[i];
    } else {
      v = sb[j];
    }
    while (i < sa.size() && sa[i] <= v) ++i;
    while (j < sb.size() && sb[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n1 -
                             static_cast<double>(j) / n2));
  }
  KsResult r;
  r.statistic = d;
  r.n1 = sa.size();
  r.n2 = sb.size();
  r.p_value = kolmogorov_survival(d * std::sqrt(n1 * n2 / (n1 + n2)));
  return r;
}

// ---------------------------------------------------------------------------
// Neighbor search (brute force on standardized rows)

namespace detail {

inline double squared_distance(const double* a, const double* b,
                               std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

struct Neighbor {
  double dist2;
  std::size_t index;
  bool operator<(const Neighbor& o) const {
    return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
  }
};

// The k nearest entries of `candidates` to `query` (row-major `z`, width d),
// excluding `self`. Ties resolve to the lower row index.
inline std::vector<Neighbor> k_nearest(const std::vector<double>& z,
                                       std::size_t d, std::size_t query,
                                       std::span<const std::size_t> candidates,
                                       std::size_t k) {
  std::vector<Neighbor> best;
  best.reserve(k + 1);
  const double* q = z.data() + query * d;
  for (auto c : candidates) {
    if (c == query) continue;
    Neighbor nb{squared_distance(q, z.data() + c * d, d), c};
    if (best.size() == k && !(nb < best.back())) continue;
    auto pos = std::upper_bound(best.begin(), best.end(), nb);
    best.insert(pos, nb);
    if (best.size() > k) best.pop_back();
  }
  return best;
}

// Exact k-nearest search over a fixed candidate set. Returns the same
// neighbors, in the same order, as k_nearest: subtrees are skipped only when
// their bounding box is strictly farther than the current k-th neighbor.
class KdTree {
 public:
  KdTree(const std::vector<double>& z, std::size_t d,
         std::span<const std::size_t> candidates)
      : z_(z), d_(d), ids_(candidates.begin(), candidates.end()) {
    if (!ids_.empty()) build(0, ids_.size());
  }

  std::vector<Neighbor> nearest(const double* q, std::size_t k,
                                std::size_t exclude) const {
    std::vector<Neighbor> best;
    best.reserve(k + 1);
    if (!ids_.empty() && k > 0) search(0, q, k, exclude, best);
    return best;
  }

 private:
  static constexpr std::size_t kLeafSize = 12;

  struct Node {
    std::size_t begin, end;
    int left = -1, right = -1;
  };

  const double* point(std::size_t id) const { return z_.data() + id * d_; }

  int build(std::size_t begin, std::size_t end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    const std::size_t base = bounds_.size();
    bounds_.resize(base + 2 * d_);
    double* lo = bounds_.data() + base;
    double* hi = lo + d_;
    std::copy_n(point(ids_[begin]), d_, lo);
    std::copy_n(point(ids_[begin]), d_, hi);
    for (std::size_t p = begin + 1; p < end; ++p) {
      const double* x = point(ids_[p]);
      for (std::size_t j = 0; j < d_; ++j) {
        lo[j] = std::min(lo[j], x[j]);
        hi[j] = std::max(hi[j], x[j]);
      }
    }
    if (end - begin <= kLeafSize) return id;
    std::size_t dim = 0;
    for (std::size_t j = 1; j < d_; ++j) {
      if (hi[j] - lo[j] > hi[dim] - lo[dim]) dim = j;
    }
    if (!(hi[dim] > lo[dim])) return id;
    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(ids_.begin() + static_cast<long>(begin),
                     ids_.begin() + static_cast<long>(mid),
                     ids_.begin() + static_cast<long>(end),
                     [&](std::size_t a, std::size_t b) {
                       return point(a)[dim] < point(b)[dim];
                     });
    const int l = build(begin, mid);
    const int r = build(mid, end);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  double box_distance(std::size_t node, const double* q) const {
    const double* lo = bounds_.data() + node * 2 * d_;
    const double* hi = lo + d_;
    double s = 0.0;
    for (std::size_t j = 0; j < d_; ++j) {
      double t = 0.0;
      if (q[j] < lo[j]) {
        t = lo[j] - q[j];
      } else if (q[j] > hi[j]) {
        t = q[j] - hi[j];
      }
      s += t * t;
    }
    return s;
  }

  void search(std::size_t node, const double* q, std::size_t k,
              std::size_t exclude, std::vector<Neighbor>& best) const {
    if (best.size() == k && box_distance(node, q) > best.back().dist2) return;
    const auto& n = nodes_[node];
    if (n.left < 0) {
      for (std::size_t p = n.begin; p < n.end; ++p) {
        const std::size_t c = ids_[p];
        if (c == exclude) continue;
        Neighbor nb{squared_distance(q, point(c), d_), c};
        if (best.size() == k && !(nb < best.back())) continue;
        best.insert(std::upper_bound(best.begin(), best.end(), nb), nb);
        if (best.size() > k) best.pop_back();
      }
      return;
    }
    const auto l = static_cast<std::size_t>(n.left);
    const auto r = static_cast<std::size_t>(n.right);
    if (box_distance(l, q) <= box_distance(r, q)) {
      search(l, q, k, exclude, best);
      search(r, q, k, exclude, best);
    } else {
      search(r, q, k, exclude, best);
      search(l, q, k, exclude, best);
    }
  }

  const std::vector<double>& z_;
  std::size_t d_;
  std::vector<std::size_t> ids_;
  std::vector<Node> nodes_;
  std::vector<double> bounds_;  // per node: lo[d], hi[d]
};

inline std::vector<std::size_t> rows_with_label(const Dataset& ds,
                                                std::uint8_t y) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.label(i) == y) out.push_back(i);
  }
  return out;
}

// Largest-remainder apportionment of `total` units by nonnegative weights
// summing to one. Remainder ties go to the lower index.
inline std::vector<std::size_t> apportion(std::span<const double> weights,
                                          std::size_t total) {
  const std::size_t m = weights.size();
  std::vector<std::size_t> alloc(m, 0);
  std::vector<double> frac(m, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double quota = weights[i] * static_cast<double>(total);
    alloc[i] = static_cast<std::size_t>(std::floor(quota));
    frac[i] = quota - std::floor(quota);
    assigned += alloc[i];
  }
  // Floating error can push the floors past the total; trim largest first.
  while (assigned > total) {
    auto it = std::max_element(alloc.begin(), alloc.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a,
                                                   std::size_t b) {
    return frac[a] > frac[b];
  });
  for (std::size_t r = 0; assigned < total; ++r) {
    alloc[order[r % m]]++;
    ++assigned;
  }
  return alloc;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ADASYN

struct AdasynConfig {
  std::size_t k_neighbors = 5;
  double target_ratio = 1.0;  // beta: rare-to-majority ratio after oversampling
  std::uint64_t seed = 0;
  // Snap synthetic binary features to {0,1}. Tests disable it to inspect the
  // raw interpolated points.
  bool round_binary = true;

  void validate() const {
    if (k_neighbors < 1) throw ConfigError("adasyn: k_neighbors must be >= 1");
    if (!(target_ratio > 0.0 && target_ratio <= 1.0)) {
      throw ConfigError("adasyn: target_ratio must lie in (0,1]");
    }
  }
};

struct SyntheticOrigin {
  std::size_t seed_row;      // minority row the point was grown from
  std::size_t neighbor_row;  // minority neighbor it moves toward
  double lambda;
};

struct AdasynResult {
  Dataset data;
  ClassCounts before;
  ClassCounts after;
  std::vector<std::size_t> minority_rows;  // input row of each minority point
  std::vector<double> difficulty;          // r_i, majority fraction among kNN
  std::vector<std::size_t> allocation;     // g_i
  std::vector<SyntheticOrigin> origins;    // one per appended row
};

// Adaptive synthetic oversampling of label-1 rows. The output starts with the
// input rows verbatim; synthetic rows follow, grown in minority-row order.
inline AdasynResult adasyn(const Dataset& ds, const AdasynConfig& cfg,
                           const std::optional<ScalerParams>& scaler =
                               std::nullopt) {
  cfg.validate();
  ds.require_both_classes("adasyn");
  const auto counts = ds.class_counts();
  if (counts.positives < 2) {
    throw DataError("adasyn: at least two minority rows are required");
  }

  AdasynResult res;
  res.before = counts;
  res.minority_rows = detail::rows_with_label(ds, 1);
  const std::size_t m = res.minority_rows.size();
  res.difficulty.assign(m, 0.0);
  res.allocation.assign(m, 0);

  const std::size_t synth_total =
      counts.negatives > counts.positives
          ? static_cast<std::size_t>(std::llround(
                static_cast<double>(counts.negatives - counts.positives) *
                cfg.target_ratio))
          : 0;
  if (synth_total == 0) {
    res.data = ds;
    res.after = counts;
    return res;
  }

  const std::size_t d = ds.cols();
  const auto params = scaler ? *scaler : fit_scaler(ds);
  const auto z = params.transform(ds);

  std::vector<std::size_t> all(ds.rows());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const std::size_t k_all = std::min(cfg.k_neighbors, ds.rows() - 1);
  const std::size_t k_min = std::min(cfg.k_neighbors, m - 1);

  std::vector<std::vector<std::size_t>> minority_nn(m);
  double total_difficulty = 0.0;
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t row = res.minority_rows[a];
    const auto nn = detail::k_nearest(z, d, row, all, k_all);
    std::size_t majority = 0;
    for (const auto& nb : nn) majority += ds.label(nb.index) == 0 ? 1 : 0;
    res.difficulty[a] =
        static_cast<double>(majority) / static_cast<double>(k_all);
    total_difficulty += res.difficulty[a];
    for (const auto& nb :
         detail::k_nearest(z, d, row, res.minority_rows, k_min)) {
      minority_nn[a].push_back(nb.index);
    }
  }

  std::vector<double> weights(m, 1.0 / static_cast<double>(m));
  if (total_difficulty > 0.0) {
    for (std::size_t a = 0; a < m; ++a) {
      weights[a] = res.difficulty[a] / total_difficulty;
    }
  }
  res.allocation = detail::apportion(weights, synth_total);

  std::vector<double> values = ds.values();
  std::vector<std::uint8_t> labels = ds.labels();
  values.reserve(values.size() + synth_total * d);
  labels.reserve(labels.size() + synth_total);
  res.origins.reserve(synth_total);

  std::mt19937_64 rng(derive_seed(cfg.seed, "adasyn"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& kinds = ds.schema().kinds;
  for (std::size_t a = 0; a < m; ++a) {
    const std::size_t row = res.minority_rows[a];
    const auto& nbrs = minority_nn[a];
    std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
    for (std::size_t g = 0; g < res.allocation[a]; ++g) {
      const std::size_t nb = nbrs[pick(rng)];
      const double lambda = unit(rng);
      for (std::size_t j = 0; j < d; ++j) {
        const double x0 = ds.at(row, j);
        double v = x0 + lambda * (ds.at(nb, j) - x0);
        if (cfg.round_binary && kinds[j] == FeatureKind::binary) {
          v = v >= 0.5 ? 1.0 : 0.0;
        }
        values.push_back(v);
      }
      labels.push_back(1);
      res.origins.push_back({row, nb, lambda});
    }
  }

  if (cfg.round_binary) {
    res.data = Dataset(ds.schema(), std::move(values), std::move(labels));
  } else {
    // Unrounded binary columns are not valid binaries; relabel them as
    // continuous so the interpolated values can be inspected.
    auto schema = ds.schema();
    for (auto& k : schema.kinds) {
      if (k == FeatureKind::binary) k = FeatureKind::continuous;
    }
    res.data = Dataset(std::move(schema), std::move(values), std::move(labels));
  }
  res.after = res.data.class_counts();
  return res;
}

// ---------------------------------------------------------------------------
// NearMiss

enum class NearMissVariant { nearmiss1 = 1, nearmiss2 = 2, nearmiss3 = 3 };

inline std::string_view to_string(NearMissVariant v) {
  switch (v) {
    case NearMissVariant::nearmiss1:
      return "nearmiss-1";
    case NearMissVariant::nearmiss2:
      return "nearmiss-2";
    case NearMissVariant::nearmiss3:
      return "nearmiss-3";
  }
  return "nearmiss-1";
}

inline NearMissVariant parse_nearmiss_variant(std::string_view s) {
  if (s == "nearmiss-1" || s == "1") return NearMissVariant::nearmiss1;
  if (s == "nearmiss-2" || s == "2") return NearMissVariant::nearmiss2;
  if (s == "nearmiss-3" || s == "3") return NearMissVariant::nearmiss3;
  throw ConfigError("unknown NearMiss variant '" + std::string(s) + "'");
}

struct NearmissConfig {
  NearMissVariant variant = NearMissVariant::nearmiss1;
  std::size_t k_neighbors = 3;
  // Majority rows to keep. Left empty, hybrid_balance matches the minority.
  std::optional<std::size_t> target_count;
};

struct NearmissResult {
  Dataset data;
  ClassCounts before;
  ClassCounts after;
  std::vector<std::size_t> retained_rows;  // input indices, ascending
  std::vector<std::string> warnings;
};

namespace detail {

// Mean distance from each majority row to its k nearest (or farthest)
// minority rows.
inline std::vector<double> nearmiss_scores(
    const std::vector<double>& z, std::size_t d,
    std::span<const std::size_t> majority,
    std::span<const std::size_t> minority, std::size_t k, bool farthest,
    unsigned threads) {
  std::vector<double> scores(majority.size(), 0.0);
  if (!farthest) {
    const KdTree tree(z, d, minority);
    parallel_for(majority.size(), threads, [&](std::size_t a) {
      const auto best =
          tree.nearest(z.data() + majority[a] * d, k, majority[a]);
      double sum = 0.0;
      for (const auto& nb : best) sum += std::sqrt(nb.dist2);
      scores[a] = sum / static_cast<double>(best.size());
    });
    return scores;
  }
  parallel_for(majority.size(), threads, [&](std::size_t a) {
    const double* q = z.data() + majority[a] * d;
    std::vector<double> best;  // sorted, farthest first
    best.reserve(k + 1);
    for (auto b : minority) {
      const double s = squared_distance(q, z.data() + b * d, d);
      if (best.size() == k && !(s > best.back())) continue;
      best.insert(std::upper_bound(best.begin(), best.end(), s,
                                   std::greater<double>()),
                  s);
      if (best.size() > k) best.pop_back();
    }
    double sum = 0.0;
    for (double s : best) sum += std::sqrt(s);
    scores[a] = sum / static_cast<double>(best.size());
  });
  return scores;
}

}  // namespace detail

// Keeps exactly `target_count` majority rows chosen by the variant's
// proximity rule; minority rows pass through and nothing is modified.
inline NearmissResult nearmiss(const Dataset& ds, const NearmissConfig& cfg,
                               const std::optional<ScalerParams>& scaler =
                                   std::nullopt,
                               unsigned threads = 1) {
  ds.require_both_classes("nearmiss");
  NearmissResult res;
  res.before = ds.class_counts();
  const auto majority = detail::rows_with_label(ds, 0);
  const auto minority = detail::rows_with_label(ds, 1);
  const std::size_t target = cfg.target_count.value_or(majority.size());
  if (target < 1 || target > majority.size()) {
    throw ConfigError("nearmiss: target_count " + std::to_string(target) +
                      " outside [1, " + std::to_string(majority.size()) + "]");
  }
  if (cfg.k_neighbors < 1) {
    throw ConfigError("nearmiss: k_neighbors must be >= 1");
  }

  if (target == majority.size()) {
    res.data = ds;
    res.after = res.before;
    res.retained_rows = majority;
    return res;
  }

  std::size_t k = cfg.k_neighbors;
  if (k > minority.size()) {
    res.warnings.push_back("nearmiss: k_neighbors " + std::to_string(k) +
                           " clamped to minority count " +
                           std::to_string(minority.size()));
    k = minority.size();
  }

  const std::size_t d = ds.cols();
  const auto params = scaler ? *scaler : fit_scaler(ds);
  const auto z = params.transform(ds);

  std::vector<std::size_t> order(majority.size());
  for (std::size_t a = 0; a < order.size(); ++a) order[a] = a;
  std::vector<std::size_t> chosen;

  switch (cfg.variant) {
    case NearMissVariant::nearmiss1:
    case NearMissVariant::nearmiss2: {
      const bool farthest = cfg.variant == NearMissVariant::nearmiss2;
      const auto scores = detail::nearmiss_scores(z, d, majority, minority, k,
                                                  farthest, threads);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return scores[a] < scores[b];
                       });
      chosen.assign(order.begin(), order.begin() + target);
      break;
    }
    case NearMissVariant::nearmiss3: {
      // Short-list the k nearest majority rows of every minority row, then
      // keep the short-listed rows farthest (on average) from their k nearest
      // minority rows. Any shortfall is filled by the NearMiss-1 ranking.
      std::vector<bool> listed(majority.size(), false);
      std::vector<std::size_t> majority_pos(ds.rows(), 0);
      for (std::size_t a = 0; a < majority.size(); ++a) {
        majority_pos[majority[a]] = a;
      }
      const std::size_t k_maj = std::min(k, majority.size());
      const detail::KdTree majority_tree(z, d, majority);
      for (auto b : minority) {
        for (const auto& nb :
             majority_tree.nearest(z.data() + b * d, k_maj, b)) {
          listed[majority_pos[nb.index]] = true;
        }
      }
      const auto scores = detail::nearmiss_scores(z, d, majority, minority, k,
                                                  false, threads);
      std::vector<std::size_t> shortlist, rest;
      for (auto a : order) (listed[a] ? shortlist : rest).push_back(a);
      std::stable_sort(shortlist.begin(), shortlist.end(),
                       [&](std::size_t a, std::size_t b) {
                         return scores[a] > scores[b];
                       });
      std::stable_sort(rest.begin(), rest.end(),
                       [&](std::size_t a, std::size_t b) {
                         return scores[a] < scores[b];
                       });
      shortlist.insert(shortlist.end(), rest.begin(), rest.end());
      chosen.assign(shortlist.begin(), shortlist.begin() + target);
      break;
    }
  }

  std::vector<bool> keep(ds.rows(), false);
  for (auto b : minority) keep[b] = true;
  for (auto a : chosen) keep[majority[a]] = true;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (!keep[i]) continue;
    rows.push_back(i);
    if (ds.label(i) == 0) res.retained_rows.push_back(i);
  }
  res.data = ds.subset(rows);
  res.after = res.data.class_counts();
  return res;
}

// ---------------------------------------------------------------------------
// Hybrid balancing with audit

struct AuditEntry {
  std::string step;  // "adasyn" or "nearmiss"
  std::string feature;
  KsResult ks;
  bool pass = true;
  ClassCounts counts_before;
  ClassCounts counts_after;
};

struct BalanceAudit {
  double alpha = 0.01;
  std::vector<AuditEntry> entries;
  ClassCounts initial;
  ClassCounts after_adasyn;
  ClassCounts final_counts;
  std::vector<std::string> warnings;

  bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(),
                       [](const AuditEntry& e) { return e.pass; });
  }
};

inline Json counts_to_json(const ClassCounts& c) {
  return {{"negatives", c.negatives}, {"positives", c.positives}};
}

inline Json to_json(const BalanceAudit& audit) {
  Json entries = Json::array();
  for (const auto& e : audit.entries) {
    entries.push_back({{"step", e.step},
                       {"feature", e.feature},
                       {"D", e.ks.statistic},
                       {"p_value", e.ks.p_value},
                       {"pass", e.pass},
                       {"n1", e.ks.n1},
                       {"n2", e.ks.n2},
                       {"counts_before", counts_to_json(e.counts_before)},
                       {"counts_after", counts_to_json(e.counts_after)}});
  }
  return {{"alpha", audit.alpha},
          {"initial", counts_to_json(audit.initial)},
          {"after_adasyn", counts_to_json(audit.after_adasyn)},
          {"final", counts_to_json(audit.final_counts)},
          {"all_pass", audit.all_pass()},
          {"warnings", audit.warnings},
          {"entries", entries}};
}

struct HybridResult {
  Dataset data;
  BalanceAudit audit;
};

// ADASYN then NearMiss, each audited per feature with a two-sample KS test:
// original vs augmented minority, then original vs retained majority.
// Both steps measure distance with a scaler fit on `ds`.
inline HybridResult hybrid_balance(const Dataset& ds,
                                   const AdasynConfig& adasyn_cfg,
                                   const NearmissConfig& nearmiss_cfg,
                                   double alpha = 0.01,
                                   unsigned threads = 1) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("hybrid_balance: alpha must lie in (0,1)");
  }
  const auto scaler = fit_scaler(ds);
  auto over = adasyn(ds, adasyn_cfg, scaler);

  NearmissConfig nm = nearmiss_cfg;
  if (!nm.target_count) {
    nm.target_count = std::min(over.after.positives, over.after.negatives);
  }
  auto under = nearmiss(over.data, nm, scaler, threads);

  HybridResult out;
  out.audit.alpha = alpha;
  out.audit.initial = over.before;
  out.audit.after_adasyn = over.after;
  out.audit.final_counts = under.after;
  out.audit.warnings = under.warnings;

  const std::size_t d = ds.cols();
  const auto min_before = detail::rows_with_label(ds, 1);
  const auto min_after = detail::rows_with_label(over.data, 1);
  const auto maj_before = detail::rows_with_label(over.data, 0);
  const auto maj_after = detail::rows_with_label(under.data, 0);
  auto gather = [](const Dataset& src, std::span<const std::size_t> rows,
                   std::size_t j) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (auto i : rows) v.push_back(src.at(i, j));
    return v;
  };

  out.audit.entries.resize(2 * d);
  parallel_for(2 * d, threads, [&](std::size_t t) {
    const bool first = t < d;
    const std::size_t j = first ? t : t - d;
    AuditEntry e;
    e.feature = ds.schema().names[j];
    if (first) {
      e.step = "adasyn";
      e.ks = ks_two_sample(gather(ds, min_before, j),
                           gather(over.data, min_after, j));
      e.counts_before = over.before;
      e.counts_after = over.after;
    } else {
      e.step = "nearmiss";
      e.ks = ks_two_sample(gather(over.data, maj_before, j),
                           gather(under.data, maj_after, j));
      e.counts_before = under.before;
      e.counts_after = under.after;
    }
    e.pass = e.ks.p_value >= alpha;
    out.audit.entries[t] = std::move(e);
  });
  out.data = std::move(under.data);
  return out;
}

}  // namespace obprop

#endif  // OBPROP_RESAMPLE_HPP_
