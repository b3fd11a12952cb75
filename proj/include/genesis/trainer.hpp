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
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "genesis/model.hpp"
#include "genesis/sampler.hpp"
#include "genesis/transforms.hpp"
#include "genesis/volume.hpp"

namespace genesis {

// ---------------------------------------------------------------------------
// Optimizers and schedules
// ---------------------------------------------------------------------------

/// w <- w - lr * g for every parameter that requires a gradient.
void sgd_step(nn::ParameterStore<float>& store, double lr);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// Bias-corrected Adam. Moments are kept per parameter in registry order;
/// frozen parameters keep zero moments and are not touched.
void adam_step(nn::ParameterStore<float>& store, AdamState& state, const AdamHyper& hyper);

struct EpochRecord {
  int epoch = 0;
  /// NaN for epoch 0, which evaluates the untrained model.
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_metric = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::string metric_name = "val_mse";
  bool higher_is_better = false;
  std::vector<EpochRecord> rows;

  /// First epoch achieving the best validation metric.
  int best_epoch() const;
  double best_metric() const;
  /// First epoch whose metric reaches `threshold` (>= when higher is better).
  std::optional<int> epochs_to_reach(double threshold) const;

  /// CSV with header epoch,train_loss,val_metric,lr[,seconds]. Without the
  /// wall-time column the output is a pure function of the run's seeds.
  std::string to_csv(bool with_seconds = true) const;
  static TrainLog from_csv(const std::string& text, std::string metric_name, bool higher_is_better);
  /// Every column except wall time is equal.
  bool same_trajectory(const TrainLog& other) const;
};

struct PlateauConfig {
  double factor = 0.5;
  int patience = 10;
  double min_lr = 1e-4;

  void validate() const;
};

/// Returns the learning rate for the next epoch. The counter restarts at the
/// last improvement or the last rate change, whichever is later; once it
/// reaches `patience` epochs the rate drops to max(lr * factor, min_lr).
double reduce_lr_on_plateau(const TrainLog& log, const PlateauConfig& cfg);

// ---------------------------------------------------------------------------
// Target-task augmentation
// ---------------------------------------------------------------------------

struct AugmentConfig {
  bool flip = true;
  bool transpose = true;
  bool rotate = true;
  bool noise = true;
  double noise_sigma = 0.01;

  static AugmentConfig none() { return {false, false, false, false, 0.01}; }
};

/// Applies random flips (p = 0.5 per axis), a transposition of equal-extent
/// axes, a right-angle rotation in the x-y plane and clamped Gaussian noise.
/// `mask`, when given, receives the same geometric ops and no noise.
void augment_target(SubVolume& image, std::vector<std::uint8_t>* mask, const AugmentConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Proxy pretraining
// ---------------------------------------------------------------------------

struct ProxyTrainConfig {
  double lr0 = 1.0;
  PlateauConfig plateau;
  int batch_size = 4;
  int max_epochs = 30;
  std::uint64_t master_seed = 0;
  SchedulerConfig scheduler;
  /// Share of volumes held out for validation (at least one).
  double val_fraction = 0.1;
  /// Worker threads preparing transformed pairs; results do not depend on it.
  int threads = 1;

  void validate() const;
};

struct PretrainResult {
  /// Snapshot of the best-validation epoch (epoch 0 included).
  Checkpoint checkpoint;
  TrainLog log;
};

/// Splits `volumes` into train/validation by index (the last share is
/// validation), crops informative sub-volumes, and trains the restoration
/// network on freshly transformed pairs every epoch. Validation pairs are
/// drawn once and reused.
PretrainResult pretrain(const std::vector<Volume>& volumes, const SamplerConfig& sampler, const ProxyTrainConfig& cfg,
                        const UNetConfig& unet, const nn::InitScheme& init);

/// Restoration pair for sample `index` in `epoch`: the stream depends only on
/// (master_seed, epoch, index).
TrainingPair make_proxy_pair(const SubVolume& crop, const SchedulerConfig& cfg, std::uint64_t master_seed,
                             std::uint64_t epoch, std::uint64_t index);

/// Prepares pairs for `indices` on `threads` workers; output order follows
/// `indices` regardless of the worker count.
std::vector<TrainingPair> prepare_proxy_pairs(const std::vector<SubVolume>& crops,
                                              const std::vector<std::size_t>& indices, const SchedulerConfig& cfg,
                                              std::uint64_t master_seed, std::uint64_t epoch, int threads);

// ---------------------------------------------------------------------------
// Target tasks and fine-tuning
// ---------------------------------------------------------------------------

enum class TaskKind : std::uint8_t { Segmentation, Classification };

const char* to_string(TaskKind k);
TaskKind parse_task_kind(const std::string& s);

struct TaskSample {
  std::string id;
  SubVolume image;
  /// Voxel mask, same shape as image (segmentation).
  std::vector<std::uint8_t> mask;
  /// Binary label (classification).
  int label = 0;
};

struct TaskDataset {
  TaskKind kind = TaskKind::Segmentation;
  std::vector<TaskSample> train;
  std::vector<TaskSample> val;
};

struct SyntheticTaskConfig {
  TaskKind kind = TaskKind::Segmentation;
  /// Segmentation crops alternate between core-centred and background-centred
  /// candidates instead of informative random crops.
  bool balanced = true;
  int n_volumes = 8;
  PhantomSpec phantom;
  SamplerConfig sampler;
  double val_fraction = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Crops of labeled phantoms with the ellipsoid cores as targets. Candidate
/// crops are alternately centred on core and background voxels; a
/// classification label says whether the centre lies in a core. Unbalanced
/// segmentation tasks use informative random crops instead.
TaskDataset make_synthetic_task(const SyntheticTaskConfig& cfg);

enum class InitMode : std::uint8_t { Scratch, Genesis };

const char* to_string(InitMode m);
InitMode parse_init_mode(const std::string& s);

struct ModelInit {
  InitMode mode = InitMode::Scratch;
  /// Used for every freshly initialized parameter (all of them for SCRATCH,
  /// the task head for GENESIS).
  nn::InitKind kind = nn::InitKind::Msra;
  /// Restoration checkpoint for GENESIS.
  std::shared_ptr<const Checkpoint> checkpoint;
};

enum class SegLoss : std::uint8_t { Bce, Dice, BceDice };

const char* to_string(SegLoss l);
SegLoss parse_seg_loss(const std::string& s);

struct TargetTrainConfig {
  AdamHyper adam;
  /// Segmentation loss; classification always uses BCE.
  SegLoss seg_loss = SegLoss::BceDice;
  int early_stop_patience = 20;
  int batch_size = 4;
  int max_epochs = 50;
  AugmentConfig augment;
  double label_fraction = 1.0;
  bool freeze_encoder = false;
  std::vector<std::size_t> fc_hidden{1024};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Indices of the training samples used for `fraction`: the first
/// ceil(fraction * n) entries of a permutation that depends only on `seed`,
/// so smaller fractions are subsets of larger ones.
std::vector<std::size_t> label_subset(std::size_t n, double fraction, std::uint64_t seed);

struct FinetuneResult {
  std::unique_ptr<nn::Network<float>> model;
  TrainLog log;
  std::vector<std::string> train_ids;
};

/// Adam with early stopping on the validation metric (pooled Dice for
/// segmentation, AUC for classification). Returns the best model.
/// Segmentation minimizes `seg_loss`; classification minimizes BCE.
FinetuneResult finetune(const TaskDataset& data, const TargetTrainConfig& cfg, const UNetConfig& unet,
                        const ModelInit& init);

/// Validation metric of `net` on `samples` (EVAL mode).
double evaluate_task(nn::Network<float>& net, TaskKind kind, const std::vector<TaskSample>& samples);

/// Stacks sub-volumes into an [N,1,z,y,x] tensor.
nn::Tensor<float> to_tensor(const std::vector<const SubVolume*>& batch);

}  // namespace genesis
