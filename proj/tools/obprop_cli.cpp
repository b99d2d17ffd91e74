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

// obprop: command-line driver for the rare-event propensity pipeline.
//
//   obprop run-all --config configs/demo.json --out out/ --threads 4
//   obprop tune --config configs/demo.json
//
// Exit status: 0 ok, 2 config error, 3 data error, 4 stage failure. On
// failure an error.json record is written to the output directory when one
// is known.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "obprop/pipeline.hpp"

namespace {

struct SharedFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  unsigned threads = obprop::default_thread_count();
};

void add_shared(CLI::App* cmd, SharedFlags& flags) {
  cmd->add_option("--config", flags.config, "Pipeline config (JSON)")
      ->required();
  cmd->add_option("--out", flags.out, "Output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "Master seed (overrides config)");
  cmd->add_option("--threads", flags.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
}

void write_error(const std::filesystem::path& dir, const obprop::Json& rec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return;
  std::ofstream out(dir / obprop::artifacts::kError);
  out << rec.dump(2) << "\n";
}

int run(const std::string& stage, const SharedFlags& flags) {
  std::optional<std::filesystem::path> out_dir;
  if (!flags.out.empty()) out_dir = flags.out;
  std::string digest;
  try {
    auto cfg = obprop::load_config(flags.config);
    if (flags.seed) cfg.seed = *flags.seed;
    if (out_dir) cfg.output_dir = *out_dir;
    out_dir = cfg.output_dir;
    obprop::Pipeline pipeline(std::move(cfg), flags.threads);
    digest = pipeline.digest();
    pipeline.log = [](const std::string& msg) { std::cerr << msg << "\n"; };
    pipeline.run(stage);
    std::filesystem::remove(*out_dir / obprop::artifacts::kError);
    return 0;
  } catch (const std::exception& e) {
    const auto rec = obprop::error_record(stage, e, digest);
    std::cerr << "obprop " << stage << ": " << rec["kind"].get<std::string>()
              << " error: " << e.what() << "\n";
    if (out_dir) write_error(*out_dir, rec);
    return rec["exit_code"].get<int>();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event propensity pipeline: balance, tune, explain"};
  app.set_version_flag("--version", obprop::kToolVersion);
  app.require_subcommand(1);

  SharedFlags flags;
  const std::pair<const char*, const char*> commands[] = {
      {"generate", "Load or synthesize the dataset"},
      {"balance", "ADASYN + NearMiss rebalancing with KS audit"},
      {"tune", "Bayesian hyperparameter search on CV PR-AUC"},
      {"train", "Fit the final ensemble on the balanced data"},
      {"evaluate", "Stratified k-fold evaluation"},
      {"explain", "TreeSHAP, importance ranking and SHAP-CART rules"},
      {"run-all", "Run every stage in order"},
  };
  for (const auto& [name, help] : commands) {
    add_shared(app.add_subcommand(name, help), flags);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return run(app.get_subcommands().front()->get_name(), flags);
}
