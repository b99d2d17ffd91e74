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

// Stage orchestration: generate -> balance -> tune -> train -> evaluate ->
// explain, driven by one JSON config and a single master seed. Each stage
// reads its inputs from and writes its artifacts to the output directory and
// records file digests in manifest.json.

#ifndef OBPROP_PIPELINE_HPP_
#define OBPROP_PIPELINE_HPP_

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "obprop/common.hpp"
#include "obprop/data.hpp"
#include "obprop/eval.hpp"
#include "obprop/explain.hpp"
#include "obprop/gbt.hpp"
#include "obprop/hpo.hpp"
#include "obprop/resample.hpp"

namespace obprop {

inline constexpr const char* kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Digests

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw StageError("sha256: digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StageError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_sha256(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

// ---------------------------------------------------------------------------
// Config

struct GeneratorSettings {
  std::size_t n = 50000;
  double prevalence = kOutflowPrevalence;
  double noise_std = 0.5;
  double intercept = -6.0;
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::optional<std::filesystem::path> data_path;
  std::optional<std::filesystem::path> schema_path;
  GeneratorSettings generator;
  ResampleSettings resample;
  std::size_t tune_budget = 32;
  std::size_t tune_cv_folds = 10;
  BayesOptConfig bayes;
  SearchSpace space = default_search_space();
  std::size_t eval_k = 20;
  double eval_threshold = 0.5;
  CartConfig cart;
};

namespace detail {

inline void check_keys(const Json& j, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) {
      throw ConfigError("unknown config key '" + where +
                        (where.empty() ? "" : ".") + it.key() + "'");
    }
  }
}

template <typename T>
void read_value(const Json& j, const char* key, const std::string& where,
                T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + where + "." + key +
                      "' has the wrong type");
  }
}

inline std::size_t read_count(const Json& j, const char* key,
                              const std::string& where, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ConfigError("config key '" + where + "." + key +
                      "' must be a nonnegative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace detail

inline PipelineConfig config_from_json(const Json& j) {
  using detail::check_keys;
  using detail::read_count;
  using detail::read_value;
  check_keys(j, "",
             {"seed", "output_dir", "data", "resample", "tune", "evaluate",
              "explain"});
  PipelineConfig c;
  if (!j.contains("seed") || !j.at("seed").is_number_unsigned()) {
    throw ConfigError("config: 'seed' is required (nonnegative integer)");
  }
  c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir")) {
    std::string s;
    read_value(j, "output_dir", "", s);
    c.output_dir = s;
  }

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"path", "schema", "generator"});
    if (d.contains("path") && d.contains("generator")) {
      throw ConfigError("data: give either 'path' or 'generator', not both");
    }
    if (d.contains("path")) {
      std::string s;
      read_value(d, "path", "data", s);
      c.data_path = s;
    }
    if (d.contains("schema")) {
      std::string s;
      read_value(d, "schema", "data", s);
      c.schema_path = s;
    }
    if (d.contains("generator")) {
      const auto& g = d.at("generator");
      check_keys(g, "data.generator",
                 {"n", "prevalence", "noise_std", "intercept"});
      c.generator.n = read_count(g, "n", "data.generator", c.generator.n);
      read_value(g, "prevalence", "data.generator", c.generator.prevalence);
      read_value(g, "noise_std", "data.generator", c.generator.noise_std);
      read_value(g, "intercept", "data.generator", c.generator.intercept);
    }
  }

  if (j.contains("resample")) {
    const auto& r = j.at("resample");
    check_keys(r, "resample", {"adasyn", "nearmiss", "alpha"});
    if (r.contains("adasyn")) {
      const auto& a = r.at("adasyn");
      check_keys(a, "resample.adasyn", {"k_neighbors", "target_ratio"});
      c.resample.adasyn.k_neighbors = read_count(
          a, "k_neighbors", "resample.adasyn", c.resample.adasyn.k_neighbors);
      read_value(a, "target_ratio", "resample.adasyn",
                 c.resample.adasyn.target_ratio);
    }
    if (r.contains("nearmiss")) {
      const auto& m = r.at("nearmiss");
      check_keys(m, "resample.nearmiss", {"variant", "k_neighbors"});
      if (m.contains("variant")) {
        std::string v;
        read_value(m, "variant", "resample.nearmiss", v);
        c.resample.nearmiss.variant = parse_nearmiss_variant(v);
      }
      c.resample.nearmiss.k_neighbors =
          read_count(m, "k_neighbors", "resample.nearmiss",
                     c.resample.nearmiss.k_neighbors);
    }
    read_value(r, "alpha", "resample", c.resample.alpha);
  }

  if (j.contains("tune")) {
    const auto& t = j.at("tune");
    check_keys(t, "tune",
               {"budget", "cv_folds", "n_init", "n_candidates", "space"});
    c.tune_budget = read_count(t, "budget", "tune", c.tune_budget);
    c.tune_cv_folds = read_count(t, "cv_folds", "tune", c.tune_cv_folds);
    c.bayes.n_init = read_count(t, "n_init", "tune", c.bayes.n_init);
    c.bayes.n_candidates =
        read_count(t, "n_candidates", "tune", c.bayes.n_candidates);
    if (t.contains("space")) {
      const auto& s = t.at("space");
      check_keys(s, "tune.space",
                 {"n_trees", "max_depth", "learning_rate", "min_split_gain"});
      for (auto& axis : c.space.axes) {
        if (!s.contains(axis.name)) continue;
        const auto& b = s.at(axis.name);
        if (!b.is_array() || b.size() != 2 || !b[0].is_number() ||
            !b[1].is_number()) {
          throw ConfigError("tune.space." + axis.name +
                            ": expected [lower, upper]");
        }
        axis.lower = b[0].get<double>();
        axis.upper = b[1].get<double>();
      }
    }
  }

  if (j.contains("evaluate")) {
    const auto& e = j.at("evaluate");
    check_keys(e, "evaluate", {"k", "threshold"});
    c.eval_k = read_count(e, "k", "evaluate", c.eval_k);
    read_value(e, "threshold", "evaluate", c.eval_threshold);
  }

  if (j.contains("explain")) {
    const auto& e = j.at("explain");
    check_keys(e, "explain", {"max_depth", "min_leaf", "cv_folds"});
    c.cart.max_depth = read_count(e, "max_depth", "explain", c.cart.max_depth);
    c.cart.min_leaf = read_count(e, "min_leaf", "explain", c.cart.min_leaf);
    c.cart.cv_folds = read_count(e, "cv_folds", "explain", c.cart.cv_folds);
  }

  c.resample.adasyn.validate();
  if (c.resample.nearmiss.k_neighbors < 1) {
    throw ConfigError("resample.nearmiss.k_neighbors must be >= 1");
  }
  if (!(c.resample.alpha > 0.0 && c.resample.alpha < 1.0)) {
    throw ConfigError("resample.alpha must lie in (0,1)");
  }
  c.space.validate();
  if (c.tune_budget < 1) throw ConfigError("tune.budget must be >= 1");
  if (c.tune_cv_folds < 2) throw ConfigError("tune.cv_folds must be >= 2");
  if (c.eval_k < 2) throw ConfigError("evaluate.k must be >= 2");
  if (!(c.eval_threshold > 0.0 && c.eval_threshold < 1.0)) {
    throw ConfigError("evaluate.threshold must lie in (0,1)");
  }
  if (c.cart.min_leaf < 1) throw ConfigError("explain.min_leaf must be >= 1");
  return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

// The effective configuration in canonical key order. Thread count and
// output directory do not affect results and are left out.
inline Json to_json(const PipelineConfig& c) {
  Json data = Json::object();
  if (c.data_path) {
    data["path"] = c.data_path->string();
    if (c.schema_path) data["schema"] = c.schema_path->string();
  } else {
    data["generator"] = {{"n", c.generator.n},
                         {"prevalence", c.generator.prevalence},
                         {"noise_std", c.generator.noise_std},
                         {"intercept", c.generator.intercept}};
  }
  Json space = Json::object();
  for (const auto& a : c.space.axes) space[a.name] = {a.lower, a.upper};
  return {{"seed", c.seed},
          {"data", data},
          {"resample",
           {{"adasyn",
             {{"k_neighbors", c.resample.adasyn.k_neighbors},
              {"target_ratio", c.resample.adasyn.target_ratio}}},
            {"nearmiss",
             {{"variant", to_string(c.resample.nearmiss.variant)},
              {"k_neighbors", c.resample.nearmiss.k_neighbors}}},
            {"alpha", c.resample.alpha}}},
          {"tune",
           {{"budget", c.tune_budget},
            {"cv_folds", c.tune_cv_folds},
            {"n_init", c.bayes.n_init},
            {"n_candidates", c.bayes.n_candidates},
            {"space", space}}},
          {"evaluate", {{"k", c.eval_k}, {"threshold", c.eval_threshold}}},
          {"explain",
           {{"max_depth", c.cart.max_depth},
            {"min_leaf", c.cart.min_leaf},
            {"cv_folds", c.cart.cv_folds}}}};
}

inline std::string config_digest(const PipelineConfig& c) {
  return sha256_hex(to_json(c).dump());
}

// ---------------------------------------------------------------------------
// Artifacts and manifest

namespace artifacts {
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kDatasetSchema = "dataset.schema.json";
inline constexpr const char* kBalanced = "balanced.csv";
inline constexpr const char* kBalancedSchema = "balanced.schema.json";
inline constexpr const char* kBalanceAudit = "balance_audit.json";
inline constexpr const char* kTuneResult = "tune_result.json";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kMetricsTable = "metrics.txt";
inline constexpr const char* kShap = "shap.csv";
inline constexpr const char* kImportance = "importance.json";
inline constexpr const char* kImportanceReport = "importance.txt";
inline constexpr const char* kCart = "cart.json";
inline constexpr const char* kRules = "rules.txt";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kError = "error.json";
}  // namespace artifacts

struct StageRecord {
  std::string name;
  std::vector<std::pair<std::string, std::string>> inputs;   // file, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // file, sha256
  double wall_clock_seconds = 0.0;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string config_digest;
  std::vector<StageRecord> stages;  // in execution order, one per stage name
};

inline Json to_json(const RunManifest& m) {
  Json stages = Json::array();
  for (const auto& s : m.stages) {
    Json in = Json::object(), out = Json::object();
    for (const auto& [f, h] : s.inputs) in[f] = h;
    for (const auto& [f, h] : s.outputs) out[f] = h;
    stages.push_back({{"stage", s.name},
                      {"inputs", in},
                      {"outputs", out},
                      {"wall_clock_seconds", s.wall_clock_seconds}});
  }
  return {{"tool_version", m.tool_version},
          {"config_digest", m.config_digest},
          {"stages", stages}};
}

inline RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.config_digest = j.at("config_digest").get<std::string>();
    for (const auto& s : j.at("stages")) {
      StageRecord r;
      r.name = s.at("stage").get<std::string>();
      for (auto it = s.at("inputs").begin(); it != s.at("inputs").end(); ++it) {
        r.inputs.emplace_back(it.key(), it.value().get<std::string>());
      }
      for (auto it = s.at("outputs").begin(); it != s.at("outputs").end();
           ++it) {
        r.outputs.emplace_back(it.key(), it.value().get<std::string>());
      }
      r.wall_clock_seconds = s.at("wall_clock_seconds").get<double>();
      m.stages.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest: malformed JSON: ") + e.what());
  }
  return m;
}

// Recomputes every recorded output digest. Returns one message per file that
// is missing or whose bytes changed; empty means the manifest verifies.
// Inputs are checked only when no later stage rewrote them.
inline std::vector<std::string> verify_manifest(
    const std::filesystem::path& dir) {
  const auto m =
      manifest_from_json(Json::parse(read_file(dir / artifacts::kManifest)));
  std::vector<std::string> problems;
  std::set<std::string> checked;
  for (auto s = m.stages.rbegin(); s != m.stages.rend(); ++s) {
    for (const auto& [file, digest] : s->outputs) {
      if (!checked.insert(file).second) continue;
      const auto path = dir / file;
      if (!std::filesystem::exists(path)) {
        problems.push_back(file + ": missing");
      } else if (file_sha256(path) != digest) {
        problems.push_back(file + ": digest mismatch (stage " + s->name + ")");
      }
    }
  }
  return problems;
}

// ---------------------------------------------------------------------------
// Stages

class Pipeline {
 public:
  Pipeline(PipelineConfig config, unsigned threads)
      : config_(std::move(config)),
        threads_(threads ? threads : 1),
        digest_(config_digest(config_)) {}

  const PipelineConfig& config() const { return config_; }
  const std::string& digest() const { return digest_; }
  const std::filesystem::path& dir() const { return config_.output_dir; }

  // Optional progress sink.
  std::function<void(const std::string&)> log;

  void generate() {
    run_stage("generate", {}, [&](StageRecord& rec) {
      Dataset ds = source_dataset();
      write_csv(ds, dir() / artifacts::kDataset);
      write_json(artifacts::kDatasetSchema, schema_document(ds.schema()));
      rec.outputs = {digest_of(artifacts::kDataset),
                     digest_of(artifacts::kDatasetSchema)};
      note("generate: " + std::to_string(ds.rows()) + " rows, " +
           std::to_string(ds.class_counts().positives) + " positives");
    });
  }

  void balance() {
    run_stage("balance", {artifacts::kDataset}, [&](StageRecord& rec) {
      const Dataset ds = load_dataset();
      auto adasyn_cfg = config_.resample.adasyn;
      adasyn_cfg.seed = derive_seed(config_.seed, "balance");
      const auto res = hybrid_balance(ds, adasyn_cfg, config_.resample.nearmiss,
                                      config_.resample.alpha, threads_);
      write_csv(res.data, dir() / artifacts::kBalanced);
      write_json(artifacts::kBalancedSchema,
                 schema_document(res.data.schema()));
      write_json(artifacts::kBalanceAudit, stamp(to_json(res.audit)));
      rec.outputs = {digest_of(artifacts::kBalanced),
                     digest_of(artifacts::kBalancedSchema),
                     digest_of(artifacts::kBalanceAudit)};
      note("balance: " + std::to_string(res.data.rows()) + " rows");
    });
  }

  void tune() {
    run_stage("tune", {artifacts::kDataset}, [&](StageRecord& rec) {
      const Dataset ds = load_dataset();
      TuneOptions opts;
      opts.budget = config_.tune_budget;
      opts.cv_folds = config_.tune_cv_folds;
      opts.resample = config_.resample;
      opts.bayes = config_.bayes;
      opts.threshold = config_.eval_threshold;
      opts.threads = threads_;
      opts.on_trial = [&](std::size_t t, const TrialRecord& r) {
        note("tune: trial " + std::to_string(t + 1) + "/" +
             std::to_string(opts.budget) + " objective " +
             (r.status == TrialStatus::ok ? format_double(r.objective)
                                          : std::string("failed")));
      };
      const auto result =
          obprop::tune(ds, config_.space, opts, derive_seed(config_.seed, "tune"));
      write_json(artifacts::kTuneResult,
                 stamp(to_json(result, config_.space)));
      rec.outputs = {digest_of(artifacts::kTuneResult)};
    });
  }

  void train() {
    run_stage("train", {artifacts::kBalanced, artifacts::kTuneResult},
              [&](StageRecord& rec) {
                const auto params = tuned_params();
                const Dataset balanced = load_csv(
                    dir() / artifacts::kBalanced,
                    load_schema(dir() / artifacts::kBalancedSchema));
                const auto model = obprop::train(
                    balanced, params, derive_seed(config_.seed, "train"));
                write_json(artifacts::kModel, stamp(to_json(model)));
                rec.outputs = {digest_of(artifacts::kModel)};
              });
  }

  void evaluate() {
    run_stage("evaluate", {artifacts::kDataset, artifacts::kTuneResult},
              [&](StageRecord& rec) {
                const Dataset ds = load_dataset();
                const auto params = tuned_params();
                const auto summary = cross_validate(
                    ds, params, config_.eval_k,
                    derive_seed(config_.seed, "evaluate"), config_.resample,
                    config_.eval_threshold, threads_);
                write_json(artifacts::kMetrics, stamp(to_json(summary)));
                write_text(artifacts::kMetricsTable, metrics_table(summary));
                rec.outputs = {digest_of(artifacts::kMetrics),
                               digest_of(artifacts::kMetricsTable)};
                note("evaluate: PR-AUC " + format_mean_std(summary.pr_auc));
              });
  }

  void explain() {
    run_stage(
        "explain", {artifacts::kDataset, artifacts::kModel},
        [&](StageRecord& rec) {
          const Dataset ds = load_dataset();
          const auto model = load_model();
          const auto sm = shap_matrix(model, ds, threads_);
          {
            std::ofstream out(dir() / artifacts::kShap, std::ios::binary);
            write_shap_csv(sm, out);
            if (!out) throw StageError("cannot write shap.csv");
          }
          const auto ranking = importance_ranking(sm);
          write_json(artifacts::kImportance,
                     stamp({{"importance", to_json(ranking)}}));
          write_text(artifacts::kImportanceReport, importance_report(ranking));

          auto cart_cfg = config_.cart;
          cart_cfg.seed = derive_seed(config_.seed, "explain");
          cart_cfg.threshold = config_.eval_threshold;
          const auto tree = fit_shap_cart(sm, ds.labels(), cart_cfg);
          const auto rules = extract_rules(tree);
          Json cart = to_json(tree);
          cart["rules"] = to_json(rules, tree.features);
          write_json(artifacts::kCart, stamp(std::move(cart)));
          std::string text;
          for (const auto& r : rules) text += rule_text(r, tree.features) + "\n";
          write_text(artifacts::kRules, text);
          rec.outputs = {digest_of(artifacts::kShap),
                         digest_of(artifacts::kImportance),
                         digest_of(artifacts::kImportanceReport),
                         digest_of(artifacts::kCart),
                         digest_of(artifacts::kRules)};
          note("explain: CART fidelity " + format_double(tree.fidelity));
        });
  }

  void run_all() {
    generate();
    balance();
    tune();
    train();
    evaluate();
    explain();
  }

  // Runs a stage by CLI name.
  void run(const std::string& stage) {
    if (stage == "generate") return generate();
    if (stage == "balance") return balance();
    if (stage == "tune") return tune();
    if (stage == "train") return train();
    if (stage == "evaluate") return evaluate();
    if (stage == "explain") return explain();
    if (stage == "run-all") return run_all();
    throw ConfigError("unknown stage '" + stage + "'");
  }

 private:
  void note(const std::string& msg) const {
    if (log) log(msg);
  }

  Json stamp(Json payload) const {
    Json j = {{"tool_version", kToolVersion}, {"config_digest", digest_}};
    for (auto it = payload.begin(); it != payload.end(); ++it) {
      j[it.key()] = std::move(it.value());
    }
    return j;
  }

  static Json schema_document(const FeatureSchema& schema) {
    return schema_to_json(schema);
  }

  void write_json(const char* name, const Json& j) const {
    write_text(name, j.dump(2) + "\n");
  }

  void write_text(const char* name, const std::string& text) const {
    std::ofstream out(dir() / name, std::ios::binary);
    out << text;
    if (!out) throw StageError(std::string("cannot write ") + name);
  }

  std::pair<std::string, std::string> digest_of(const char* name) const {
    return {name, file_sha256(dir() / name)};
  }

  void require_input(const char* name) const {
    if (!std::filesystem::exists(dir() / name)) {
      throw StageError(std::string("missing stage input '") + name +
                       "'; run the producing stage first");
    }
  }

  Dataset source_dataset() const {
    if (config_.data_path) {
      std::optional<FeatureSchema> schema;
      if (config_.schema_path) schema = load_schema(*config_.schema_path);
      return load_csv(*config_.data_path, schema);
    }
    auto cfg = default_generator_config(config_.generator.n,
                                        config_.generator.prevalence,
                                        derive_seed(config_.seed, "data"));
    cfg.noise_stddev = config_.generator.noise_std;
    cfg.intercept = config_.generator.intercept;
    return generate_synthetic(cfg);
  }

  Dataset load_dataset() const {
    return load_csv(dir() / artifacts::kDataset,
                    load_schema(dir() / artifacts::kDatasetSchema));
  }

  Json load_stamped(const char* name) const {
    Json j;
    try {
      j = Json::parse(read_file(dir() / name));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string(name) + ": " + e.what());
    }
    if (j.value("config_digest", std::string()) != digest_) {
      throw StageError(std::string(name) +
                       " was produced by a different config; rerun its stage");
    }
    return j;
  }

  BoostParams tuned_params() const {
    return best_params_from_json(load_stamped(artifacts::kTuneResult));
  }

  GradientBoostedEnsemble load_model() const {
    return ensemble_from_json(load_stamped(artifacts::kModel));
  }

  RunManifest load_manifest() const {
    const auto path = dir() / artifacts::kManifest;
    if (std::filesystem::exists(path)) {
      try {
        auto m = manifest_from_json(Json::parse(read_file(path)));
        if (m.config_digest == digest_) return m;
      } catch (const Error&) {
      } catch (const nlohmann::json::exception&) {
      }
    }
    RunManifest m;
    m.config_digest = digest_;
    return m;
  }

  void run_stage(const std::string& name,
                 std::initializer_list<const char*> inputs,
                 const std::function<void(StageRecord&)>& body) {
    std::filesystem::create_directories(dir());
    for (const char* in : inputs) require_input(in);
    StageRecord rec;
    rec.name = name;
    for (const char* in : inputs) rec.inputs.push_back(digest_of(in));
    const auto start = std::chrono::steady_clock::now();
    body(rec);
    rec.wall_clock_seconds = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - start)
                                 .count();
    auto manifest = load_manifest();
    std::erase_if(manifest.stages,
                  [&](const StageRecord& s) { return s.name == name; });
    manifest.stages.push_back(std::move(rec));
    write_json(artifacts::kManifest, to_json(manifest));
  }

  PipelineConfig config_;
  unsigned threads_;
  std::string digest_;
};

// ---------------------------------------------------------------------------
// Error reporting

inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  return 4;
}

inline std::string error_kind(int code) {
  switch (code) {
    case 2:
      return "config";
    case 3:
      return "data";
    default:
      return "stage";
  }
}

inline Json error_record(const std::string& stage, const std::exception& e,
                         const std::string& digest) {
  const int code = exit_code_for(e);
  Json j = {{"status", "error"},
            {"tool_version", kToolVersion},
            {"stage", stage},
            {"kind", error_kind(code)},
            {"exit_code", code},
            {"message", e.what()}};
  if (!digest.empty()) j["config_digest"] = digest;
  return j;
}

}  // namespace obprop

#endif  // OBPROP_PIPELINE_HPP_
