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

// Bayesian hyperparameter search: a Latin-hypercube warm-up followed by a
// Matern-5/2 Gaussian-process surrogate maximizing Expected Improvement.

#ifndef OBPROP_HPO_HPP_
#define OBPROP_HPO_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "obprop/common.hpp"
#include "obprop/data.hpp"
#include "obprop/eval.hpp"
#include "obprop/gbt.hpp"

namespace obprop {

struct SearchAxis {
  std::string name;  // a BoostParams field
  double lower = 0.0;
  double upper = 1.0;
  bool log_scale = false;
  bool integer = false;
};

struct SearchSpace {
  std::vector<SearchAxis> axes;

  std::size_t dims() const { return axes.size(); }

  void validate() const {
    if (axes.empty()) throw ConfigError("search space: no axes");
    for (const auto& a : axes) {
      if (!(a.lower < a.upper)) {
        throw ConfigError("search space: axis '" + a.name +
                          "' needs lower < upper");
      }
      if (a.log_scale && !(a.lower > 0.0)) {
        throw ConfigError("search space: log axis '" + a.name +
                          "' needs a positive lower bound");
      }
    }
  }

  // Unit-cube coordinate -> parameter value, rounded on integer axes.
  std::vector<double> from_unit(std::span<const double> u) const {
    std::vector<double> out(dims());
    for (std::size_t i = 0; i < dims(); ++i) {
      const auto& a = axes[i];
      const double t = std::clamp(u[i], 0.0, 1.0);
      double v = a.log_scale
                     ? std::exp(std::log(a.lower) +
                                t * (std::log(a.upper) - std::log(a.lower)))
                     : a.lower + t * (a.upper - a.lower);
      if (a.integer) v = std::round(v);
      out[i] = std::clamp(v, a.lower, a.upper);
    }
    return out;
  }

  std::vector<double> to_unit(std::span<const double> point) const {
    std::vector<double> out(dims());
    for (std::size_t i = 0; i < dims(); ++i) {
      const auto& a = axes[i];
      const double t =
          a.log_scale ? (std::log(point[i]) - std::log(a.lower)) /
                            (std::log(a.upper) - std::log(a.lower))
                      : (point[i] - a.lower) / (a.upper - a.lower);
      out[i] = std::clamp(t, 0.0, 1.0);
    }
    return out;
  }

  bool contains(std::span<const double> point) const {
    for (std::size_t i = 0; i < dims(); ++i) {
      const auto& a = axes[i];
      if (point[i] < a.lower || point[i] > a.upper) return false;
      if (a.integer && point[i] != std::round(point[i])) return false;
    }
    return true;
  }
};

// Tree number, tree depth, adaptation (learning) rate, and the split-gain
// floor that controls node splitting.
inline SearchSpace default_search_space() {
  return SearchSpace{{{"n_trees", 50, 500, false, true},
                      {"max_depth", 2, 8, false, true},
                      {"learning_rate", 0.01, 0.3, true, false},
                      {"min_split_gain", 0, 5, false, false}}};
}

inline BoostParams apply_point(const SearchSpace& space,
                               std::span<const double> point,
                               BoostParams base = {}) {
  for (std::size_t i = 0; i < space.dims(); ++i) {
    const auto& name = space.axes[i].name;
    const double v = point[i];
    if (name == "n_trees") {
      base.n_trees = static_cast<std::size_t>(std::llround(v));
    } else if (name == "max_depth") {
      base.max_depth = static_cast<std::size_t>(std::llround(v));
    } else if (name == "learning_rate") {
      base.learning_rate = v;
    } else if (name == "min_split_gain") {
      base.min_split_gain = v;
    } else if (name == "l2_reg") {
      base.l2_reg = v;
    } else if (name == "min_child_hessian") {
      base.min_child_hessian = v;
    } else {
      throw ConfigError("search space: unknown parameter '" + name + "'");
    }
  }
  return base;
}

enum class TrialStatus { ok, failed };

struct TrialRecord {
  std::vector<double> point;
  BoostParams params;
  double objective = 0.0;  // mean CV PR-AUC
  double objective_std = 0.0;
  TrialStatus status = TrialStatus::ok;
  std::string error;
};

struct TuneResult {
  TrialRecord best;
  std::vector<TrialRecord> history;
  std::uint64_t seed = 0;
};

struct BayesOptConfig {
  std::size_t n_init = 8;
  std::size_t n_candidates = 2048;
  double noise = 1e-6;
  double neighbor_step = 0.05;  // unit-cube offset for incumbent neighbors
};

// ---------------------------------------------------------------------------
// Gaussian process

inline double matern52(double r, double lengthscale, double signal_var) {
  const double s = std::sqrt(5.0) * r / lengthscale;
  return signal_var * (1.0 + s + s * s / 3.0) * std::exp(-s);
}

// Zero-mean GP on standardized targets with an isotropic Matern-5/2 kernel.
// Kernel hyperparameters are chosen by log marginal likelihood over a fixed
// 5x5 grid.
class GaussianProcess {
 public:
  static constexpr std::array<double, 5> kLengthscales{0.1, 0.2, 0.4, 0.8,
                                                       1.6};
  static constexpr std::array<double, 5> kSignalVars{0.25, 0.5, 1.0, 2.0,
                                                     4.0};

  GaussianProcess(std::vector<std::vector<double>> inputs,
                  std::span<const double> targets, double noise = 1e-6)
      : x_(std::move(inputs)), noise_(noise) {
    const std::size_t n = x_.size();
    if (n == 0 || targets.size() != n) {
      throw ConfigError("gaussian process: need matching nonempty data");
    }
    double mean = 0.0;
    for (double t : targets) mean += t;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double t : targets) ss += (t - mean) * (t - mean);
    const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
    y_mean_ = mean;
    y_scale_ = sd > 0.0 ? sd : 1.0;
    y_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      y_(static_cast<Eigen::Index>(i)) = (targets[i] - y_mean_) / y_scale_;
    }

    double best_lml = -std::numeric_limits<double>::infinity();
    bool fitted = false;
    for (double ls : kLengthscales) {
      for (double sv : kSignalVars) {
        Eigen::LLT<Eigen::MatrixXd> llt(gram(ls, sv));
        if (llt.info() != Eigen::Success) continue;
        Eigen::VectorXd alpha = llt.solve(y_);
        const Eigen::MatrixXd l = llt.matrixL();
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < l.rows(); ++i) log_det += std::log(l(i, i));
        const double lml = -0.5 * y_.dot(alpha) - log_det -
                           0.5 * static_cast<double>(n) *
                               std::log(2.0 * std::numbers::pi);
        if (lml > best_lml) {
          best_lml = lml;
          lengthscale_ = ls;
          signal_var_ = sv;
          llt_ = llt;
          alpha_ = alpha;
          fitted = true;
        }
      }
    }
    if (!fitted) throw StageError("gaussian process: covariance not positive");
    log_marginal_likelihood_ = best_lml;
  }

  struct Posterior {
    double mean;    // original target units
    double stddev;  // original target units
  };

  Posterior predict(std::span<const double> x) const {
    const auto [m, s] = predict_standardized(x);
    return {y_mean_ + y_scale_ * m, y_scale_ * s};
  }

  // Mean and standard deviation on the standardized scale used for EI.
  std::pair<double, double> predict_standardized(
      std::span<const double> x) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::VectorXd k(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      k(i) = matern52(distance(x_[static_cast<std::size_t>(i)], x),
                      lengthscale_, signal_var_);
    }
    const double mean = k.dot(alpha_);
    const Eigen::VectorXd v = llt_.matrixL().solve(k);
    const double var = std::max(signal_var_ - v.squaredNorm(), 0.0);
    return {mean, std::sqrt(var)};
  }

  double standardize(double y) const { return (y - y_mean_) / y_scale_; }
  double lengthscale() const { return lengthscale_; }
  double signal_variance() const { return signal_var_; }
  double log_marginal_likelihood() const { return log_marginal_likelihood_; }

 private:
  static double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

  Eigen::MatrixXd gram(double ls, double sv) const {
    const auto n = static_cast<Eigen::Index>(x_.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j <= i; ++j) {
        const double v =
            matern52(distance(x_[static_cast<std::size_t>(i)],
                              x_[static_cast<std::size_t>(j)]),
                     ls, sv);
        k(i, j) = v;
        k(j, i) = v;
      }
      k(i, i) += noise_;
    }
    return k;
  }

  std::vector<std::vector<double>> x_;
  Eigen::VectorXd y_;
  double noise_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double lengthscale_ = 0.2;
  double signal_var_ = 1.0;
  double log_marginal_likelihood_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
};

// Expected Improvement for maximization; never negative.
inline double expected_improvement(double mean, double stddev,
                                   double incumbent) {
  const double delta = mean - incumbent;
  if (!(stddev > 1e-12)) return std::max(delta, 0.0);
  const double z = delta / stddev;
  const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
  const double pdf =
      std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  return std::max(delta * cdf + stddev * pdf, 0.0);
}

// ---------------------------------------------------------------------------
// Suggestion

namespace detail {

inline double radical_inverse(std::uint64_t index, std::uint64_t base) {
  double result = 0.0;
  double f = 1.0 / static_cast<double>(base);
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= static_cast<double>(base);
  }
  return result;
}

inline constexpr std::array<std::uint64_t, 12> kPrimes{2,  3,  5,  7,  11, 13,
                                                       17, 19, 23, 29, 31, 37};

// Latin-hypercube design of `count` points in [0,1]^dims.
inline std::vector<std::vector<double>> latin_hypercube(std::size_t count,
                                                        std::size_t dims,
                                                        std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, "lhs"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> pts(count, std::vector<double>(dims));
  for (std::size_t j = 0; j < dims; ++j) {
    std::vector<std::size_t> perm(count);
    for (std::size_t i = 0; i < count; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t i = 0; i < count; ++i) {
      pts[i][j] = (static_cast<double>(perm[i]) + unit(rng)) /
                  static_cast<double>(count);
    }
  }
  return pts;
}

}  // namespace detail

// Observed (point, objective) pairs in parameter units.
struct Observation {
  std::vector<double> point;
  double objective = 0.0;
  bool ok = true;
};

// Next point to evaluate. Pure in (history, space, seed): the first n_init
// calls walk a seeded Latin-hypercube design, later calls maximize EI of a GP
// fitted to the successful observations over a shifted Halton set plus the
// incumbent's axis neighbors.
inline std::vector<double> suggest_point(std::span<const Observation> history,
                                         const SearchSpace& space,
                                         std::uint64_t seed,
                                         const BayesOptConfig& cfg = {}) {
  space.validate();
  const std::size_t dims = space.dims();
  if (history.size() < cfg.n_init) {
    const auto design = detail::latin_hypercube(cfg.n_init, dims, seed);
    return space.from_unit(design[history.size()]);
  }

  std::mt19937_64 rng(derive_seed(seed, "suggest", history.size()));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  for (const auto& h : history) {
    if (!h.ok) continue;
    xs.push_back(space.to_unit(h.point));
    ys.push_back(h.objective);
  }
  if (xs.empty()) {
    std::vector<double> u(dims);
    for (auto& v : u) v = unit(rng);
    return space.from_unit(u);
  }

  const std::size_t best_idx = static_cast<std::size_t>(
      std::max_element(ys.begin(), ys.end()) - ys.begin());
  const std::vector<double> incumbent = xs[best_idx];
  const GaussianProcess gp(xs, ys, cfg.noise);
  const double best_y = gp.standardize(ys[best_idx]);

  std::vector<double> shift(dims);
  for (auto& s : shift) s = unit(rng);
  std::vector<std::vector<double>> candidates;
  candidates.reserve(cfg.n_candidates + 2 * dims);
  for (std::size_t c = 0; c < cfg.n_candidates; ++c) {
    std::vector<double> u(dims);
    for (std::size_t j = 0; j < dims; ++j) {
      const double h = detail::radical_inverse(
          c + 1, detail::kPrimes[j % detail::kPrimes.size()]);
      u[j] = std::fmod(h + shift[j], 1.0);
    }
    candidates.push_back(std::move(u));
  }
  for (std::size_t j = 0; j < dims; ++j) {
    for (double sign : {-1.0, 1.0}) {
      auto u = incumbent;
      u[j] = std::clamp(u[j] + sign * cfg.neighbor_step, 0.0, 1.0);
      candidates.push_back(std::move(u));
    }
  }

  double best_ei = -1.0;
  std::vector<double> best_point;
  for (const auto& u : candidates) {
    // Score the point that would actually be evaluated (integer axes
    // rounded).
    auto point = space.from_unit(u);
    const auto snapped = space.to_unit(point);
    const auto [m, s] = gp.predict_standardized(snapped);
    const double ei = expected_improvement(m, s, best_y);
    if (ei > best_ei) {
      best_ei = ei;
      best_point = std::move(point);
    }
  }
  return best_point;
}

inline std::vector<Observation> to_observations(
    std::span<const TrialRecord> history) {
  std::vector<Observation> obs;
  obs.reserve(history.size());
  for (const auto& t : history) {
    obs.push_back({t.point, t.objective, t.status == TrialStatus::ok});
  }
  return obs;
}

inline BoostParams suggest(std::span<const TrialRecord> history,
                           const SearchSpace& space, std::uint64_t seed,
                           const BayesOptConfig& cfg = {},
                           const BoostParams& base = {}) {
  const auto obs = to_observations(history);
  return apply_point(space, suggest_point(obs, space, seed, cfg), base);
}

// ---------------------------------------------------------------------------
// Tuning loop

// Random search is kept as a baseline for the Bayesian strategy.
enum class SearchStrategy { bayesian, random };

struct TuneOptions {
  SearchStrategy strategy = SearchStrategy::bayesian;
  std::size_t budget = 32;
  std::size_t cv_folds = 10;
  std::optional<ResampleSettings> resample;
  BayesOptConfig bayes;
  BoostParams base;  // values for parameters outside the search space
  double threshold = 0.5;
  unsigned threads = 1;
  std::function<void(std::size_t, const TrialRecord&)> on_trial;
};

inline std::size_t best_trial_index(std::span<const TrialRecord> history) {
  std::size_t best = history.size();
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i].status != TrialStatus::ok) continue;
    if (best == history.size() ||
        history[i].objective > history[best].objective) {
      best = i;
    }
  }
  return best;
}

// Evaluates one parameter point by mean cross-validated PR-AUC.
inline TrialRecord run_trial(const std::vector<PreparedFold>& folds,
                             std::vector<double> point,
                             const SearchSpace& space,
                             const TuneOptions& opts, std::uint64_t seed) {
  TrialRecord rec;
  rec.point = std::move(point);
  rec.params = apply_point(space, rec.point, opts.base);
  try {
    const auto summary =
        evaluate_folds(folds, rec.params, seed, opts.threshold, opts.threads);
    if (!summary.pr_auc.defined()) {
      rec.status = TrialStatus::failed;
      rec.error = "no fold with positives";
    } else {
      rec.objective = summary.pr_auc.mean;
      rec.objective_std = summary.pr_auc.stddev;
    }
  } catch (const Error& e) {
    rec.status = TrialStatus::failed;
    rec.error = e.what();
  }
  return rec;
}

// Folds are planned and rebalanced once; every trial reuses them.
inline TuneResult tune(const Dataset& ds, const SearchSpace& space,
                       const TuneOptions& opts, std::uint64_t seed) {
  if (opts.budget < 1) throw ConfigError("tune: budget must be >= 1");
  space.validate();
  const auto plan =
      stratified_kfold(ds, opts.cv_folds, derive_seed(seed, "tune-folds"));
  const auto folds = prepare_folds(ds, plan, opts.resample,
                                   derive_seed(seed, "tune-resample"),
                                   opts.threads);
  TuneResult result;
  result.seed = seed;
  std::vector<Observation> obs;
  for (std::size_t t = 0; t < opts.budget; ++t) {
    std::vector<double> point;
    if (opts.strategy == SearchStrategy::bayesian) {
      point = suggest_point(obs, space, seed, opts.bayes);
    } else {
      std::mt19937_64 rng(derive_seed(seed, "random-search", t));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<double> u(space.dims());
      for (auto& v : u) v = unit(rng);
      point = space.from_unit(u);
    }
    auto rec = run_trial(folds, std::move(point), space, opts,
                         derive_seed(seed, "trial", t));
    obs.push_back({rec.point, rec.objective, rec.status == TrialStatus::ok});
    if (opts.on_trial) opts.on_trial(t, rec);
    result.history.push_back(std::move(rec));
  }
  const auto best = best_trial_index(result.history);
  if (best == result.history.size()) {
    throw StageError("tune: every trial failed");
  }
  result.best = result.history[best];
  return result;
}

inline Json to_json(const TrialRecord& t, const SearchSpace& space) {
  Json point = Json::object();
  for (std::size_t i = 0; i < space.dims() && i < t.point.size(); ++i) {
    point[space.axes[i].name] = t.point[i];
  }
  Json j = {{"point", point},
            {"params", to_json(t.params)},
            {"status", t.status == TrialStatus::ok ? "ok" : "failed"}};
  if (t.status == TrialStatus::ok) {
    j["objective"] = t.objective;
    j["objective_std"] = t.objective_std;
  } else {
    j["objective"] = nullptr;
    j["objective_std"] = nullptr;
    j["error"] = t.error;
  }
  return j;
}

inline Json to_json(const SearchSpace& space) {
  Json axes = Json::array();
  for (const auto& a : space.axes) {
    axes.push_back({{"name", a.name},
                    {"lower", a.lower},
                    {"upper", a.upper},
                    {"log_scale", a.log_scale},
                    {"integer", a.integer}});
  }
  return axes;
}

inline Json to_json(const TuneResult& r, const SearchSpace& space) {
  Json history = Json::array();
  for (const auto& t : r.history) history.push_back(to_json(t, space));
  return {{"seed", r.seed},
          {"space", to_json(space)},
          {"best", to_json(r.best, space)},
          {"history", history}};
}

inline BoostParams best_params_from_json(const Json& j) {
  try {
    return boost_params_from_json(j.at("best").at("params"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("tune result: malformed JSON: ") + e.what());
  }
}

}  // namespace obprop

#endif  // OBPROP_HPO_HPP_
