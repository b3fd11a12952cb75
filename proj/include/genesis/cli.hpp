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

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genesis/experiments.hpp"

namespace genesis::cli {

struct IngestConfig {
  /// "ct" (clip HU and rescale), "minmax", or "none" (already in [0, 1]).
  std::string normalize = "ct";
  /// Raw inputs (anything that is not .nii) need explicit geometry.
  Dims3 raw_dims{0, 0, 0};
  /// "f32" or "i16", little-endian.
  std::string raw_dtype = "f32";
  Spacing3 raw_spacing{1.0f, 1.0f, 1.0f};
};

struct EvalConfig {
  int trials = 10;
  std::vector<Scheme> schemes = all_schemes();
  std::vector<double> fractions{0.1, 0.2, 0.5, 1.0};
  std::vector<InitMode> inits{InitMode::Scratch, InitMode::Genesis};
  /// Pretraining scheme behind GENESIS in sweeps.
  Scheme sweep_scheme = Scheme::Combined;
};

/// Parsed and resolved run configuration. `seed` drives the proxy stream,
/// the fine-tuning stream and the first trial seed; phantoms, crops and the
/// synthetic task have their own seeds.
struct RunConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path out = "genesis_out";
  BenchConfig bench = BenchConfig::toy();
  /// Empty means the probabilities are used as given.
  std::optional<Scheme> scheme;
  /// Directory of MVOL volumes for pretraining; empty means phantoms.
  std::filesystem::path data_dir;
  InitMode init = InitMode::Scratch;
  std::filesystem::path checkpoint;
  IngestConfig ingest;
  EvalConfig eval;

  /// Scheduler with the scheme preset and the network's receptive field.
  SchedulerConfig scheduler() const;
  /// Bench with seeds and threads applied.
  BenchConfig resolved_bench() const;
  void validate() const;
};

/// Applies one dotted key; unknown keys and malformed values are ConfigError.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// Parses "key = value" lines ('#' starts a comment) on top of `base`.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
/// Every key with its current value, one per line, in a fixed order.
std::string dump_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

// Commands. Each writes into cfg.out (created if needed) and returns a short
// human-readable summary.
std::string cmd_phantom(const RunConfig& cfg);
std::string cmd_ingest(const RunConfig& cfg, const std::vector<std::filesystem::path>& inputs);
std::string cmd_preview(const RunConfig& cfg, const std::optional<std::filesystem::path>& volume);
std::string cmd_pretrain(const RunConfig& cfg);
std::string cmd_finetune(const RunConfig& cfg);
std::string cmd_ablation(const RunConfig& cfg);
std::string cmd_sweep(const RunConfig& cfg);
/// Reads the tables and logs in `run_dir` and writes plot_*.csv next to them.
std::string cmd_report(const std::filesystem::path& run_dir);

/// Tiles 2D slices (values in [0, 1]) into a binary PGM (P5).
std::vector<std::uint8_t> montage_pgm(const std::vector<std::vector<float>>& tiles, std::size_t width,
                                      std::size_t height, std::size_t columns);

/// Exit code for an exception: 1 config, 2 I/O, 3 anything else.
int exit_code(const std::exception& e);
/// One-line "error kind=<config|io|runtime> exit=<n>: <message>".
std::string error_line(const std::exception& e);

/// Entry point used by the genesis executable.
int run(int argc, char** argv);

}  // namespace genesis::cli
