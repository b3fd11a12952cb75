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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "genesis/evalstat.hpp"
#include "genesis/trainer.hpp"

namespace genesis {

/// Everything needed to go from an unlabeled phantom corpus to fine-tuned
/// target models.
struct BenchConfig {
  UNetConfig unet = UNetConfig::toy();
  nn::InitKind init_kind = nn::InitKind::Msra;

  /// Unlabeled pretraining corpus; volume i is generated with seed
  /// derive_seed(phantom.seed, i).
  int corpus_volumes = 24;
  PhantomSpec phantom;
  SamplerConfig proxy_sampler;
  /// The scheduler probabilities are replaced per scheme; the remaining
  /// scheduler fields are kept. The receptive field is taken from `unet`.
  /// Weight initialization is seeded from proxy.master_seed.
  ProxyTrainConfig proxy;

  SyntheticTaskConfig task;
  /// `seed` and `label_fraction` are set per trial.
  TargetTrainConfig target;

  /// Toy network, toy crops and a short schedule.
  static BenchConfig toy();
  void validate() const;
};

/// Lazily builds the pretraining corpus and the target task once, caches one
/// pretrained checkpoint per scheme, and runs seeded fine-tuning trials.
class TransferBench {
 public:
  explicit TransferBench(BenchConfig cfg);

  const BenchConfig& config() const { return cfg_; }
  const TaskDataset& task();
  const std::vector<Volume>& corpus();

  const PretrainResult& pretrained(Scheme scheme);
  /// Installs an externally trained result (e.g. read from disk).
  void set_pretrained(Scheme scheme, PretrainResult result);

  /// Fine-tunes from scratch or from the checkpoint pretrained with `scheme`.
  FinetuneResult run(InitMode mode, Scheme scheme, std::uint64_t seed, double label_fraction);

  /// Metric name of the task ("dice" or "auc").
  std::string metric_name() const;

 private:
  BenchConfig cfg_;
  std::optional<TaskDataset> task_;
  std::optional<std::vector<Volume>> corpus_;
  std::map<Scheme, PretrainResult> pretrained_;
  std::map<Scheme, std::shared_ptr<const Checkpoint>> checkpoints_;
};

/// One significance test between two table rows.
struct Comparison {
  std::string a;
  std::string b;
  TTestResult test;
};

/// Key/value notes about the statistics used, written next to every table.
std::vector<std::pair<std::string, std::string>> statistics_metadata();

struct AblationTable {
  std::string task;
  std::string metric;
  /// One row per scheme, in the requested order.
  std::vector<TrialResult> rows;
  /// Best vs second best and second worst vs worst, by mean.
  Comparison top_two;
  Comparison bottom_two;

  std::string to_csv() const;
  /// "comparison,a,b,t,p,dof,significant,degenerate".
  std::string tests_csv() const;
  std::vector<PlotPoint> plot() const;
};

std::vector<Scheme> all_schemes();

/// For each scheme: pretrain (cached), then n GENESIS fine-tuning trials with
/// seeds base_seed + i at the bench's label fraction. Trials share seeds
/// across schemes.
AblationTable ablation_matrix(TransferBench& bench, const std::vector<Scheme>& schemes, int n,
                              std::uint64_t base_seed);

struct SweepCell {
  double fraction = 1.0;
  InitMode init = InitMode::Scratch;
  TrialResult result;
  /// Training sample ids of every trial, in trial order.
  std::vector<std::vector<std::string>> train_ids;
};

struct ShortfallRow {
  double fraction = 1.0;
  InitMode init = InitMode::Scratch;
  double mean = 0.0;
  /// Best mean over all fractions <= this one.
  double envelope = 0.0;
  /// max(0, reference - envelope).
  double shortfall = 0.0;
};

struct SweepTable {
  std::string task;
  std::string metric;
  std::vector<double> fractions;
  std::vector<InitMode> inits;
  /// Fraction-major: cells[f * inits.size() + i].
  std::vector<SweepCell> cells;
  /// Full-data runs per init, same seeds.
  std::vector<TrialResult> reference;
  /// Scheme the GENESIS checkpoint was pretrained with.
  Scheme scheme = Scheme::Combined;

  const SweepCell& cell(std::size_t fraction_index, std::size_t init_index) const;
  /// Full-data mean the shortfall is measured against: SCRATCH when present,
  /// otherwise the first init.
  double reference_mean() const;
  /// Smallest fraction whose GENESIS mean reaches the SCRATCH full-data
  /// mean; empty when never reached or when either init is missing.
  std::optional<double> savings_fraction() const;
  /// Per init, rows in increasing fraction order; the shortfall never grows.
  std::vector<ShortfallRow> shortfall() const;

  /// "fraction,init,n,mean,sd,ci95"; reference rows use fraction "full".
  std::string to_csv() const;
  /// "fraction,init,mean,envelope,shortfall".
  std::string shortfall_csv() const;
  std::vector<PlotPoint> plot() const;
};

/// Throws ConfigError unless fractions are strictly increasing in (0, 1].
void validate_fractions(const std::vector<double>& fractions);

/// For each (fraction, init), n trials with seeds base_seed + i. The subset
/// for a trial depends only on its seed, so within a trial the training ids
/// of a smaller fraction are contained in those of a larger one.
SweepTable annotation_sweep(TransferBench& bench, const std::vector<double>& fractions,
                            const std::vector<InitMode>& inits, int n, std::uint64_t base_seed,
                            Scheme scheme = Scheme::Combined);

/// "method,task,metric,trial,seed,value", one row per trial.
std::string trial_values_csv(const std::vector<TrialResult>& results);

// ---------------------------------------------------------------------------
// Convergence study: SCRATCH vs GENESIS, combined vs identity pretraining
// ---------------------------------------------------------------------------

struct TransferPair {
  std::uint64_t seed = 0;
  /// First epoch whose validation metric reaches the threshold.
  std::optional<int> scratch_epochs;
  std::optional<int> genesis_epochs;
  double scratch_best = 0.0;
  double combined_best = 0.0;
  double identity_best = 0.0;

  /// GENESIS reaches the threshold and SCRATCH reaches it later or never.
  bool genesis_faster() const;
};

struct TransferStudy {
  double threshold = 0.0;
  std::vector<TransferPair> pairs;
  int genesis_wins = 0;
  TrialResult scratch;
  /// GENESIS pretrained with the combined and the identity scheme.
  TrialResult combined;
  TrialResult identity;
  TTestResult combined_vs_identity;

  /// "seed,scratch_epochs,genesis_epochs,scratch_best,combined_best,identity_best";
  /// epochs are empty when the threshold was never reached.
  std::string to_csv() const;
};

/// Per seed: SCRATCH, GENESIS(combined) and GENESIS(identity) at the
/// bench's label fraction. GENESIS in the convergence comparison is the
/// combined checkpoint.
TransferStudy run_transfer_study(TransferBench& bench, double threshold, const std::vector<std::uint64_t>& seeds);

/// One-line summary of every bench setting that affects the study.
std::string bench_fingerprint(const BenchConfig& cfg);

/// Frozen threshold for the convergence comparison: `factor` times the mean
/// best SCRATCH metric over `calibration_seeds`. Only SCRATCH runs enter the
/// threshold.
struct TransferCalibration {
  std::string bench;
  double factor = 0.75;
  std::vector<std::uint64_t> calibration_seeds;
  std::vector<double> scratch_best;
  double threshold = 0.0;
  /// Seeds for the study itself, disjoint from calibration_seeds.
  std::vector<std::uint64_t> study_seeds;

  std::string to_text() const;
  static TransferCalibration from_text(const std::string& text);
};

TransferCalibration calibrate_transfer(TransferBench& bench, const std::vector<std::uint64_t>& calibration_seeds,
                                       double factor, const std::vector<std::uint64_t>& study_seeds);
TransferCalibration load_transfer_calibration(const std::filesystem::path& path);

}  // namespace genesis
