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

// Classification metrics and the stratified cross-validation protocol.

#ifndef OBPROP_EVAL_HPP_
#define OBPROP_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "obprop/common.hpp"
#include "obprop/data.hpp"
#include "obprop/gbt.hpp"
#include "obprop/resample.hpp"

namespace obprop {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Predicted positive iff score >= threshold.
inline ConfusionCounts confusion(std::span<const std::uint8_t> labels,
                                 std::span<const double> scores,
                                 double threshold) {
  if (labels.size() != scores.size()) {
    throw ConfigError("confusion: labels and scores differ in length");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i]) {
      (predicted ? c.tp : c.fn)++;
    } else {
      (predicted ? c.fp : c.tn)++;
    }
  }
  return c;
}

// An empty optional marks a metric whose denominator is zero.
struct ClassificationRates {
  std::optional<double> accuracy;
  std::optional<double> recall;
  std::optional<double> specificity;
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline ClassificationRates metrics_from_confusion(const ConfusionCounts& c) {
  return {ratio(c.tp + c.tn, c.total()), ratio(c.tp, c.tp + c.fn),
          ratio(c.tn, c.tn + c.fp)};
}

// Average precision: sum over descending distinct-score groups of
// (recall gain) * (precision at that group). Tied scores form one group.
inline double pr_auc(std::span<const std::uint8_t> labels,
                     std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw ConfigError("pr_auc: labels and scores differ in length");
  }
  const std::size_t positives = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  if (positives == 0) throw DataError("pr_auc: no positive labels");

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });

  const double p = static_cast<double>(positives);
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t r = 0; r < order.size();) {
    const double s = scores[order[r]];
    while (r < order.size() && scores[order[r]] == s) {
      tp += labels[order[r]];
      ++seen;
      ++r;
    }
    const double recall = static_cast<double>(tp) / p;
    const double precision =
        static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldMetrics {
  std::size_t fold = 0;
  std::size_t rows = 0;
  std::size_t positives = 0;
  std::optional<double> pr_auc;  // absent when the fold has no positives
  std::optional<double> recall;
  std::optional<double> specificity;
  std::optional<double> accuracy;
};

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 with fewer than 2 folds
  std::size_t folds = 0;
  bool defined() const { return folds > 0; }
};

struct MetricsSummary {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double threshold = 0.5;
  std::vector<FoldMetrics> folds;
  MetricStat pr_auc;
  MetricStat recall;
  MetricStat specificity;
  MetricStat accuracy;
  std::size_t positive_free_folds = 0;
};

inline MetricStat aggregate(const std::vector<std::optional<double>>& values) {
  MetricStat s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    ++s.folds;
  }
  if (s.folds == 0) return s;
  s.mean = sum / static_cast<double>(s.folds);
  if (s.folds >= 2) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) ss += (*v - s.mean) * (*v - s.mean);
    }
    s.stddev = std::sqrt(ss / static_cast<double>(s.folds - 1));
  }
  return s;
}

// "0.91537 (0.00817)"
inline std::string format_mean_std(const MetricStat& s) {
  if (!s.defined()) return "undefined";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.5f (%.5f)", s.mean, s.stddev);
  return buf;
}

inline std::string metrics_table(const MetricsSummary& m) {
  const struct {
    const char* name;
    const MetricStat* stat;
  } rows[] = {{"PR-AUC", &m.pr_auc},
              {"Recall", &m.recall},
              {"Specificity", &m.specificity},
              {"Accuracy", &m.accuracy}};
  std::string out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-12s  %s\n", "metric", "mean (std)");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-12s  %s\n", r.name,
                  format_mean_std(*r.stat).c_str());
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "folds: %zu, positive-free folds excluded from PR-AUC/Recall: "
                "%zu\n",
                m.k, m.positive_free_folds);
  out += buf;
  return out;
}

inline Json optional_json(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

inline Json stat_to_json(const MetricStat& s) {
  if (!s.defined()) return {{"mean", nullptr}, {"std", nullptr}, {"folds", 0}};
  return {{"mean", s.mean}, {"std", s.stddev}, {"folds", s.folds}};
}

inline Json to_json(const MetricsSummary& m) {
  Json folds = Json::array();
  for (const auto& f : m.folds) {
    folds.push_back({{"fold", f.fold},
                     {"rows", f.rows},
                     {"positives", f.positives},
                     {"pr_auc", optional_json(f.pr_auc)},
                     {"recall", optional_json(f.recall)},
                     {"specificity", optional_json(f.specificity)},
                     {"accuracy", optional_json(f.accuracy)}});
  }
  return {{"k", m.k},
          {"seed", m.seed},
          {"threshold", m.threshold},
          {"positive_free_folds", m.positive_free_folds},
          {"pr_auc", stat_to_json(m.pr_auc)},
          {"recall", stat_to_json(m.recall)},
          {"specificity", stat_to_json(m.specificity)},
          {"accuracy", stat_to_json(m.accuracy)},
          {"folds", folds}};
}

struct ResampleSettings {
  AdasynConfig adasyn;
  NearmissConfig nearmiss;
  double alpha = 0.01;
};

// One fold's training data (rebalanced when requested) and untouched test
// rows.
struct PreparedFold {
  std::size_t index = 0;
  Dataset train;
  Dataset test;
};

// Splits by `plan` and rebalances each training portion independently. Test
// folds never see resampling. The resampling seed of fold f is derived from
// (seed, f) so folds are order-independent.
inline std::vector<PreparedFold> prepare_folds(
    const Dataset& ds, const FoldPlan& plan,
    const std::optional<ResampleSettings>& resample, std::uint64_t seed,
    unsigned threads = 1) {
  std::vector<PreparedFold> folds(plan.k);
  parallel_for(plan.k, threads, [&](std::size_t f) {
    PreparedFold pf;
    pf.index = f;
    const auto train_idx = plan.train_indices(f);
    const auto test_idx = plan.test_indices(f);
    pf.test = ds.subset(test_idx);
    Dataset train = ds.subset(train_idx);
    if (resample) {
      auto cfg = resample->adasyn;
      cfg.seed = derive_seed(seed, "fold-adasyn", f);
      train = hybrid_balance(train, cfg, resample->nearmiss, resample->alpha)
                  .data;
    }
    pf.train = std::move(train);
    folds[f] = std::move(pf);
  });
  return folds;
}

inline FoldMetrics score_fold(std::size_t fold,
                              std::span<const std::uint8_t> labels,
                              std::span<const double> proba,
                              double threshold) {
  FoldMetrics fm;
  fm.fold = fold;
  fm.rows = labels.size();
  fm.positives = static_cast<std::size_t>(
      std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  const auto rates = metrics_from_confusion(confusion(labels, proba, threshold));
  fm.accuracy = rates.accuracy;
  fm.specificity = rates.specificity;
  if (fm.positives > 0) {
    fm.recall = rates.recall;
    fm.pr_auc = pr_auc(labels, proba);
  }
  return fm;
}

inline MetricsSummary summarize(std::vector<FoldMetrics> folds,
                                std::uint64_t seed, double threshold) {
  MetricsSummary m;
  m.k = folds.size();
  m.seed = seed;
  m.threshold = threshold;
  std::vector<std::optional<double>> ap, rec, spec, acc;
  for (const auto& f : folds) {
    ap.push_back(f.pr_auc);
    rec.push_back(f.recall);
    spec.push_back(f.specificity);
    acc.push_back(f.accuracy);
    if (f.positives == 0) ++m.positive_free_folds;
  }
  m.pr_auc = aggregate(ap);
  m.recall = aggregate(rec);
  m.specificity = aggregate(spec);
  m.accuracy = aggregate(acc);
  m.folds = std::move(folds);
  return m;
}

// Trains one model per prepared fold and scores its test rows.
inline MetricsSummary evaluate_folds(const std::vector<PreparedFold>& folds,
                                     const BoostParams& params,
                                     std::uint64_t seed,
                                     double threshold = 0.5,
                                     unsigned threads = 1) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0,1)");
  }
  std::vector<FoldMetrics> results(folds.size());
  parallel_for(folds.size(), threads, [&](std::size_t f) {
    const auto& pf = folds[f];
    const auto model =
        train(pf.train, params, derive_seed(seed, "fold-train", pf.index));
    const auto proba = model.predict_proba(pf.test);
    results[f] = score_fold(pf.index, pf.test.labels(), proba, threshold);
  });
  return summarize(std::move(results), seed, threshold);
}

inline MetricsSummary cross_validate(
    const Dataset& ds, const BoostParams& params, std::size_t k,
    std::uint64_t seed, const std::optional<ResampleSettings>& resample,
    double threshold = 0.5, unsigned threads = 1) {
  const auto plan = stratified_kfold(ds, k, seed);
  const auto folds = prepare_folds(ds, plan, resample, seed, threads);
  return evaluate_folds(folds, params, seed, threshold, threads);
}

}  // namespace obprop

#endif  // OBPROP_EVAL_HPP_
