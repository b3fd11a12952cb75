/* Copyright 2026 The Genesis Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <CLI11.hpp>
#include <iostream>

#include "genesis/cli.hpp"

namespace genesis::cli {

int run(int argc, char** argv) {
  CLI::App app{"genesis: self-supervised pretraining and transfer for 3D volumes"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  int threads = 1;
  auto* seed_opt = app.add_option("--seed", seed, "Master seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads for preparing training pairs");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  app.add_option("--config", config_path, "Config file of dotted key = value lines");
  app.add_option("--set", overrides, "Extra key=value settings, applied after --config");

  auto* phantom = app.add_subcommand("phantom", "Generate phantom volumes as MVOL files");
  auto* ingest = app.add_subcommand("ingest", "Convert NIfTI-1 or raw volumes to normalized MVOL");
  std::vector<std::string> ingest_inputs;
  ingest->add_option("inputs", ingest_inputs, "Input files")->required();
  auto* preview = app.add_subcommand("preview", "Write a PGM montage of every transform outcome");
  std::string preview_volume;
  preview->add_option("volume", preview_volume, "MVOL volume (defaults to a phantom)");
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Train the restoration network on the proxy task");
  auto* finetune_cmd = app.add_subcommand("finetune", "Fine-tune on the synthetic target task");
  auto* ablation = app.add_subcommand("ablation", "Compare transformation schemes on the target task");
  auto* sweep = app.add_subcommand("sweep", "Label-fraction sweep for scratch and pretrained inits");
  auto* report = app.add_subcommand("report", "Turn the tables and logs of a run directory into plot data");
  std::string run_dir;
  report->add_option("run_dir", run_dir, "Directory written by ablation, sweep, pretrain or finetune")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error kind=config exit=1: " << e.what() << '\n';
    return 1;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (*seed_opt) cfg.seed = seed;
    if (*threads_opt) cfg.threads = threads;
    if (*out_opt) cfg.out = out;

    std::string summary;
    if (*phantom) {
      summary = cmd_phantom(cfg);
    } else if (*ingest) {
      summary = cmd_ingest(cfg, {ingest_inputs.begin(), ingest_inputs.end()});
    } else if (*preview) {
      summary = cmd_preview(cfg, preview_volume.empty() ? std::nullopt
                                                         : std::optional<std::filesystem::path>(preview_volume));
    } else if (*pretrain_cmd) {
      summary = cmd_pretrain(cfg);
    } else if (*finetune_cmd) {
      summary = cmd_finetune(cfg);
    } else if (*ablation) {
      summary = cmd_ablation(cfg);
    } else if (*sweep) {
      summary = cmd_sweep(cfg);
    } else if (*report) {
      summary = cmd_report(run_dir);
    }
    std::cout << summary << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << error_line(e) << '\n';
    return exit_code(e);
  }
}

}  // namespace genesis::cli
