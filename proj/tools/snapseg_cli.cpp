// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

// snapseg <command> [--config FILE] [--set key=value ...]

#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "snapseg/pipeline.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitMissing = 2;
constexpr int kExitConfig = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"snapseg: snapshot-based weakly supervised point cloud segmentation"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "key=value config file");
  app.add_option("-s,--set", overrides, "override a config key (key=value), repeatable");

  using Cmd = std::function<void(const snapseg::PipelineConfig&)>;
  const std::vector<std::pair<std::string, std::pair<std::string, Cmd>>> commands = {
      {"synth", {"generate the synthetic scene", snapseg::cmd_synth}},
      {"sample", {"capture multi-FOV snapshots", snapseg::cmd_sample}},
      {"pretrain", {"train the ContrastNet on a pretext task", snapseg::cmd_pretrain}},
      {"cluster", {"KMeans++ on ContrastNet features", snapseg::cmd_cluster}},
      {"cluster-train", {"train the ClusterNet on cluster ids", snapseg::cmd_cluster_train}},
      {"extract", {"extract ClusterNet features", snapseg::cmd_extract}},
      {"fit", {"fit the weakly supervised SVM", snapseg::cmd_fit}},
      {"segment", {"point-wise segmentation by voting", snapseg::cmd_segment}},
      {"eval", {"score the final labels", [](const snapseg::PipelineConfig& c) { snapseg::cmd_eval(c); }}},
      {"finetune", {"fine-tune the ClusterNet on a new scene", snapseg::cmd_finetune}},
      {"run-all", {"run every stage in order", [](const snapseg::PipelineConfig& c) { snapseg::cmd_run_all(c); }}},
  };
  std::map<const CLI::App*, Cmd> dispatch;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("-c,--config", config_path, "key=value config file");
    sub->add_option("-s,--set", overrides, "override a config key (key=value), repeatable");
    dispatch[sub] = entry.second;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cfg = snapseg::load_pipeline_config(
        config_path.empty() ? std::nullopt : std::optional<std::string>(config_path), overrides);
    for (const auto& [sub, cmd] : dispatch) {
      if (sub->parsed()) cmd(cfg);
    }
  } catch (const snapseg::MissingArtifact& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMissing;
  } catch (const snapseg::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return 0;
}
