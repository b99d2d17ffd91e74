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
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "obprop/pipeline.hpp"

namespace obprop {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() /
                   ("obprop_pipeline_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Json small_config(std::uint64_t seed) {
  return {{"seed", seed},
          {"data",
           {{"generator", {{"n", 3000}, {"prevalence", 0.04}}}}},
          {"resample", {{"adasyn", {{"target_ratio", 0.2}}}}},
          {"tune",
           {{"budget", 3},
            {"cv_folds", 3},
            {"n_init", 2},
            {"n_candidates", 64},
            {"space",
             {{"n_trees", {5, 20}}, {"max_depth", {2, 3}}}}}},
          {"evaluate", {{"k", 3}}},
          {"explain", {{"max_depth", 3}, {"min_leaf", 10}, {"cv_folds", 3}}}};
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const auto path = dir / "config.json";
  std::ofstream(path) << j.dump(2);
  return path;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(OBPROP_CLI_PATH) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json read_json(const fs::path& p) { return Json::parse(read_file(p)); }

TEST(Config, ParsesAndCanonicalizes) {
  const auto c = config_from_json(small_config(5));
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.generator.n, 3000u);
  EXPECT_EQ(c.tune_budget, 3u);
  EXPECT_EQ(c.space.axes[0].upper, 20.0);
  EXPECT_EQ(c.eval_k, 3u);
  // Round trip through the canonical form keeps the digest.
  const auto again = config_from_json(to_json(c));
  EXPECT_EQ(config_digest(again), config_digest(c));
  auto other = small_config(6);
  EXPECT_NE(config_digest(config_from_json(other)), config_digest(c));
}

TEST(Config, Rejections) {
  auto j = small_config(1);
  j["tune"]["budgett"] = 3;
  try {
    config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("tune.budgett"), std::string::npos);
  }
  auto no_seed = small_config(1);
  no_seed.erase("seed");
  EXPECT_THROW(config_from_json(no_seed), ConfigError);
  auto neg = small_config(1);
  neg["seed"] = -3;
  EXPECT_THROW(config_from_json(neg), ConfigError);
  auto bad_alpha = small_config(1);
  bad_alpha["resample"]["alpha"] = 1.5;
  EXPECT_THROW(config_from_json(bad_alpha), ConfigError);
  auto bad_axis = small_config(1);
  bad_axis["tune"]["space"]["max_depth"] = {4};
  EXPECT_THROW(config_from_json(bad_axis), ConfigError);
  auto bad_type = small_config(1);
  bad_type["evaluate"]["threshold"] = "high";
  EXPECT_THROW(config_from_json(bad_type), ConfigError);
}

TEST(Digest, KnownVector) {
  EXPECT_EQ(sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Cli, RunAllEmitsEveryArtifact) {
  const auto dir = scratch("run_all");
  const auto cfg = write_config(dir, small_config(11));
  const auto out = dir / "out";
  ASSERT_EQ(run_cli("run-all --config " + cfg.string() + " --out " +
                    out.string() + " --threads 1"),
            0);
  for (const char* f :
       {artifacts::kDataset, artifacts::kDatasetSchema, artifacts::kBalanced,
        artifacts::kBalancedSchema, artifacts::kBalanceAudit,
        artifacts::kTuneResult, artifacts::kModel, artifacts::kMetrics,
        artifacts::kMetricsTable, artifacts::kShap, artifacts::kImportance,
        artifacts::kImportanceReport, artifacts::kCart, artifacts::kRules,
        artifacts::kManifest}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  EXPECT_FALSE(fs::exists(out / artifacts::kError));

  const auto digest = config_digest(config_from_json(small_config(11)));
  for (const char* f : {artifacts::kBalanceAudit, artifacts::kTuneResult,
                        artifacts::kModel, artifacts::kMetrics,
                        artifacts::kImportance, artifacts::kCart}) {
    const auto j = read_json(out / f);
    EXPECT_EQ(j.at("config_digest"), digest) << f;
    EXPECT_EQ(j.at("tool_version"), kToolVersion) << f;
  }
  const auto manifest = manifest_from_json(read_json(out / artifacts::kManifest));
  ASSERT_EQ(manifest.stages.size(), 6u);
  EXPECT_EQ(manifest.stages.front().name, "generate");
  EXPECT_EQ(manifest.stages.back().name, "explain");
  EXPECT_TRUE(verify_manifest(out).empty());

  const auto metrics = read_json(out / artifacts::kMetrics);
  EXPECT_EQ(metrics.at("k"), 3);
  EXPECT_TRUE(metrics.at("pr_auc").at("mean").is_number());

  // Tampering is detected.
  std::ofstream(out / artifacts::kRules, std::ios::app) << "x";
  const auto problems = verify_manifest(out);
  ASSERT_EQ(problems.size(), 1u);
  EXPECT_NE(problems[0].find(artifacts::kRules), std::string::npos);
}

TEST(Cli, ByteIdenticalAcrossThreadCounts) {
  const auto dir = scratch("threads");
  const auto cfg = write_config(dir, small_config(12));
  ASSERT_EQ(run_cli("run-all --config " + cfg.string() + " --out " +
                    (dir / "a").string() + " --threads 1"),
            0);
  ASSERT_EQ(run_cli("run-all --config " + cfg.string() + " --out " +
                    (dir / "b").string() + " --threads 3"),
            0);
  for (const char* f :
       {artifacts::kDataset, artifacts::kBalanced, artifacts::kBalanceAudit,
        artifacts::kTuneResult, artifacts::kModel, artifacts::kMetrics,
        artifacts::kShap, artifacts::kImportance, artifacts::kCart,
        artifacts::kRules}) {
    EXPECT_EQ(file_sha256(dir / "a" / f), file_sha256(dir / "b" / f)) << f;
  }
}

TEST(Cli, SeedFlagOverridesConfig) {
  const auto dir = scratch("seed");
  const auto cfg = write_config(dir, small_config(1));
  ASSERT_EQ(run_cli("generate --config " + cfg.string() + " --out " +
                    (dir / "a").string() + " --seed 2"),
            0);
  ASSERT_EQ(run_cli("generate --config " + cfg.string() + " --out " +
                    (dir / "b").string()),
            0);
  EXPECT_NE(file_sha256(dir / "a" / artifacts::kDataset),
            file_sha256(dir / "b" / artifacts::kDataset));
}

TEST(Cli, ExitCodesAndErrorRecords) {
  const auto dir = scratch("errors");

  auto unknown = small_config(1);
  unknown["colour"] = "blue";
  const auto bad_cfg = write_config(dir, unknown);
  EXPECT_EQ(run_cli("generate --config " + bad_cfg.string() + " --out " +
                    (dir / "cfg").string()),
            2);
  const auto cfg_err = read_json(dir / "cfg" / artifacts::kError);
  EXPECT_EQ(cfg_err.at("kind"), "config");
  EXPECT_EQ(cfg_err.at("exit_code"), 2);
  EXPECT_NE(cfg_err.at("message").get<std::string>().find("colour"),
            std::string::npos);

  EXPECT_EQ(run_cli("generate"), 2);
  EXPECT_EQ(run_cli("frobnicate --config x"), 2);

  const auto csv = dir / "broken.csv";
  std::ofstream(csv) << "x1,x2,label\n1,2,0\n3,abc,1\n";
  auto data_cfg = small_config(1);
  data_cfg["data"] = {{"path", csv.string()}};
  const auto data_cfg_path = dir / "data.json";
  std::ofstream(data_cfg_path) << data_cfg.dump();
  EXPECT_EQ(run_cli("generate --config " + data_cfg_path.string() +
                    " --out " + (dir / "data").string()),
            3);
  const auto data_err = read_json(dir / "data" / artifacts::kError);
  EXPECT_EQ(data_err.at("kind"), "data");
  EXPECT_EQ(data_err.at("stage"), "generate");

  const auto good_cfg = write_config(dir, small_config(1));
  EXPECT_EQ(run_cli("train --config " + good_cfg.string() + " --out " +
                    (dir / "stage").string()),
            4);
  const auto stage_err = read_json(dir / "stage" / artifacts::kError);
  EXPECT_EQ(stage_err.at("kind"), "stage");
  EXPECT_NE(stage_err.at("message").get<std::string>().find("balanced.csv"),
            std::string::npos);
}

TEST(Pipeline, StagesRerunIndependently) {
  const auto dir = scratch("stages");
  auto cfg = config_from_json(small_config(21));
  cfg.output_dir = dir;
  Pipeline p(cfg, 1);
  p.generate();
  p.balance();
  const auto balanced = file_sha256(dir / artifacts::kBalanced);
  p.balance();
  EXPECT_EQ(file_sha256(dir / artifacts::kBalanced), balanced);
  EXPECT_THROW(p.train(), StageError);  // no tune_result.json yet
  p.tune();
  p.train();
  const auto manifest = manifest_from_json(read_json(dir / artifacts::kManifest));
  ASSERT_EQ(manifest.stages.size(), 4u);
  EXPECT_EQ(manifest.stages[1].name, "balance");
  EXPECT_EQ(manifest.stages[1].inputs[0].first, artifacts::kDataset);
  EXPECT_TRUE(verify_manifest(dir).empty());

  // A model from another config is refused.
  auto other = config_from_json(small_config(22));
  other.output_dir = dir;
  Pipeline q(other, 1);
  EXPECT_THROW(q.explain(), StageError);
  EXPECT_THROW(p.run("nonsense"), ConfigError);
}

TEST(Pipeline, ExternalCsvInput) {
  const auto dir = scratch("csv");
  const auto ds = generate_synthetic(default_generator_config(1500, 0.05, 3));
  write_csv(ds, dir / "input.csv");
  auto j = small_config(4);
  j["data"] = {{"path", (dir / "input.csv").string()}};
  auto cfg = config_from_json(j);
  cfg.output_dir = dir / "out";
  Pipeline p(cfg, 1);
  p.generate();
  const auto loaded = load_csv(dir / "out" / artifacts::kDataset,
                               load_schema(dir / "out" /
                                           artifacts::kDatasetSchema));
  EXPECT_EQ(loaded.rows(), ds.rows());
  EXPECT_EQ(loaded.values(), ds.values());
}

TEST(ErrorRecord, Mapping) {
  EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
  EXPECT_EQ(exit_code_for(DataError("x")), 3);
  EXPECT_EQ(exit_code_for(StageError("x")), 4);
  EXPECT_EQ(exit_code_for(std::runtime_error("x")), 4);
  const auto j = error_record("tune", DataError("bad"), "abc");
  EXPECT_EQ(j.at("status"), "error");
  EXPECT_EQ(j.at("config_digest"), "abc");
}

TEST(DemoConfig, Loads) {
  const auto c =
      load_config(fs::path(OBPROP_SOURCE_DIR) / "configs" / "demo.json");
  EXPECT_EQ(c.seed, 42u);
}

}  // namespace
}  // namespace obprop
