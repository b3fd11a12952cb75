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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "genesis/evalstat.hpp"
#include "genesis/trainer.hpp"

namespace genesis {

namespace {

constexpr std::uint64_t kSubsetStream = 0x737562;  // "sub"
constexpr std::uint64_t kInitStream = 0x696e69;    // "ini"
constexpr std::uint64_t kOrderStream = 0x6f7264;   // "ord"
constexpr std::uint64_t kAugStream = 0x617567;     // "aug"

bool is_encoder_name(const std::string& name) {
  return name.rfind("enc", 0) == 0 || name.rfind("bottleneck.", 0) == 0;
}

// Candidate crops: even-numbered crops are centred on a core
// voxel, odd-numbered ones on a background voxel (when the volume has both).
std::vector<SubVolume> candidate_crops(const LabeledPhantom& lp, const SamplerConfig& sc, const std::string& id) {
  const Dims3 vd = lp.volume.dims();
  const Dims3 cs = sc.crop_shape;
  if (cs.x > vd.x || cs.y > vd.y || cs.z > vd.z) throw ShapeError("crop larger than volume");
  std::vector<std::size_t> fg, bg;
  for (std::size_t z = cs.z / 2; z + cs.z - cs.z / 2 <= vd.z; ++z)
    for (std::size_t y = cs.y / 2; y + cs.y - cs.y / 2 <= vd.y; ++y)
      for (std::size_t x = cs.x / 2; x + cs.x - cs.x / 2 <= vd.x; ++x) {
        const std::size_t i = vd.offset(x, y, z);
        (lp.mask[i] ? fg : bg).push_back(i);
      }
  Rng rng(sc.seed);
  std::vector<SubVolume> out;
  for (int k = 0; k < sc.n_per_volume; ++k) {
    const auto& pool = (k % 2 == 0 && !fg.empty()) || bg.empty() ? fg : bg;
    const std::size_t c = pool[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(pool.size()) - 1))];
    const std::size_t cx = c % vd.x, cy = (c / vd.x) % vd.y, cz = c / (vd.x * vd.y);
    out.push_back(extract_subvolume(lp.volume, {cx - cs.x / 2, cy - cs.y / 2, cz - cs.z / 2}, cs, id));
  }
  return out;
}

}  // namespace

const char* to_string(TaskKind k) { return k == TaskKind::Segmentation ? "segmentation" : "classification"; }

TaskKind parse_task_kind(const std::string& s) {
  if (s == "segmentation") return TaskKind::Segmentation;
  if (s == "classification") return TaskKind::Classification;
  throw ConfigError("unknown task '" + s + "' (expected segmentation or classification)");
}

const char* to_string(SegLoss l) {
  switch (l) {
    case SegLoss::Bce: return "bce";
    case SegLoss::Dice: return "dice";
    case SegLoss::BceDice: return "bce_dice";
  }
  return "?";
}

SegLoss parse_seg_loss(const std::string& s) {
  if (s == "bce") return SegLoss::Bce;
  if (s == "dice") return SegLoss::Dice;
  if (s == "bce_dice") return SegLoss::BceDice;
  throw ConfigError("unknown segmentation loss '" + s + "' (expected bce, dice or bce_dice)");
}

const char* to_string(InitMode m) { return m == InitMode::Scratch ? "scratch" : "genesis"; }

InitMode parse_init_mode(const std::string& s) {
  if (s == "scratch") return InitMode::Scratch;
  if (s == "genesis") return InitMode::Genesis;
  throw ConfigError("unknown init '" + s + "' (expected scratch or genesis)");
}

void SyntheticTaskConfig::validate() const {
  if (n_volumes < 2) throw ConfigError("task.n_volumes must be >= 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("task.val_fraction must be in (0, 1)");
  phantom.validate();
  sampler.validate();
}

TaskDataset make_synthetic_task(const SyntheticTaskConfig& cfg) {
  cfg.validate();
  TaskDataset ds;
  ds.kind = cfg.kind;
  const auto n = static_cast<std::size_t>(cfg.n_volumes);
  const std::size_t n_val =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(cfg.val_fraction * static_cast<double>(n))), 1, n - 1);
  for (std::size_t v = 0; v < n; ++v) {
    PhantomSpec ps = cfg.phantom;
    ps.seed = derive_seed(cfg.seed, v);
    const LabeledPhantom lp = generate_labeled_phantom(ps);
    SamplerConfig sc = cfg.sampler;
    sc.seed = derive_seed(cfg.sampler.seed, cfg.seed, v);
    std::vector<SubVolume> crops;
    if (cfg.kind == TaskKind::Segmentation && !cfg.balanced) {
      crops = crop_subvolumes(lp.volume, sc, "task" + std::to_string(v)).crops;
    } else {
      crops = candidate_crops(lp, sc, "task" + std::to_string(v));
    }
    const Dims3 vd = lp.volume.dims();
    for (std::size_t k = 0; k < crops.size(); ++k) {
      TaskSample s;
      s.id = "v" + std::to_string(v) + "c" + std::to_string(k);
      s.image = std::move(crops[k]);
      const Dims3 cs = s.image.shape;
      const Index3 o = s.image.origin;
      s.mask.resize(cs.count());
      std::size_t i = 0;
      for (std::size_t z = 0; z < cs.z; ++z)
        for (std::size_t y = 0; y < cs.y; ++y)
          for (std::size_t x = 0; x < cs.x; ++x) s.mask[i++] = lp.mask[vd.offset(o.x + x, o.y + y, o.z + z)];
      s.label = s.mask[cs.offset(cs.x / 2, cs.y / 2, cs.z / 2)];
      (v < n - n_val ? ds.train : ds.val).push_back(std::move(s));
    }
  }
  if (ds.train.empty() || ds.val.empty()) throw Error("synthetic task produced an empty split");
  if (cfg.kind == TaskKind::Classification) {
    for (const auto* split : {&ds.train, &ds.val}) {
      const auto pos = std::count_if(split->begin(), split->end(), [](const TaskSample& s) { return s.label == 1; });
      if (pos == 0 || pos == static_cast<std::ptrdiff_t>(split->size()))
        throw Error("synthetic classification task has a single-class split; use more volumes or crops");
    }
  }
  return ds;
}

void TargetTrainConfig::validate() const {
  if (!(adam.lr > 0.0) || !(adam.eps > 0.0)) throw ConfigError("target.lr and target.eps must be > 0");
  if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0))
    throw ConfigError("target.beta1 and target.beta2 must be in (0, 1)");
  if (early_stop_patience < 1) throw ConfigError("target.early_stop_patience must be >= 1");
  if (batch_size < 2) throw ConfigError("target.batch_size must be >= 2 (batch normalization)");
  if (max_epochs < 1) throw ConfigError("target.max_epochs must be >= 1");
  if (!(label_fraction > 0.0 && label_fraction <= 1.0)) throw ConfigError("target.label_fraction must be in (0, 1]");
  if (augment.noise && !(augment.noise_sigma >= 0.0)) throw ConfigError("target.noise_sigma must be >= 0");
}

std::vector<std::size_t> label_subset(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("label fraction must be in (0, 1]");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  // Guard against 0.1 * 30 = 3.0000000000000004 rounding up to 4.
  const double want = fraction * static_cast<double>(n);
  auto k = static_cast<std::size_t>(std::ceil(want - 1e-9 * std::max(1.0, want)));
  perm.resize(std::min(k, n));
  return perm;
}

double evaluate_task(nn::Network<float>& net, TaskKind kind, const std::vector<TaskSample>& samples) {
  if (samples.empty()) throw Error("evaluate_task: no samples");
  const nn::Mode saved = net.mode();
  net.set_mode(nn::Mode::Eval);
  constexpr std::size_t kBatch = 8;
  std::vector<std::uint8_t> pred_mask, true_mask;
  std::vector<double> scores;
  std::vector<int> labels;
  for (std::size_t b = 0; b < samples.size(); b += kBatch) {
    const std::size_t e = std::min(samples.size(), b + kBatch);
    std::vector<const SubVolume*> xs;
    for (std::size_t i = b; i < e; ++i) xs.push_back(&samples[i].image);
    const nn::Tensor<float> out = net.predict(to_tensor(xs));
    if (kind == TaskKind::Segmentation) {
      for (float p : out.data) pred_mask.push_back(p >= 0.5f ? 1 : 0);
      for (std::size_t i = b; i < e; ++i) true_mask.insert(true_mask.end(), samples[i].mask.begin(), samples[i].mask.end());
    } else {
      for (std::size_t i = b; i < e; ++i) {
        scores.push_back(out.data[i - b]);
        labels.push_back(samples[i].label);
      }
    }
  }
  net.set_mode(saved);
  return kind == TaskKind::Segmentation ? dice(pred_mask, true_mask) : auc(scores, labels);
}

FinetuneResult finetune(const TaskDataset& data, const TargetTrainConfig& cfg, const UNetConfig& unet,
                        const ModelInit& init) {
  cfg.validate();
  unet.validate();
  if (data.train.empty()) throw Error("finetune: empty training split");
  if (data.val.empty()) throw Error("finetune: empty validation split");
  unet.validate_input(data.train.front().image.shape);
  if (init.mode == InitMode::Genesis && !init.checkpoint) throw ConfigError("GENESIS init needs a checkpoint");

  const std::vector<std::size_t> subset =
      label_subset(data.train.size(), cfg.label_fraction, derive_seed(cfg.seed, kSubsetStream));
  if (subset.empty()) throw Error("finetune: empty training split after subsampling");

  FinetuneResult result;
  for (std::size_t i : subset) result.train_ids.push_back(data.train[i].id);

  const nn::InitScheme scheme{init.kind, derive_seed(cfg.seed, kInitStream)};
  if (data.kind == TaskKind::Segmentation) {
    std::unique_ptr<UNet<float>> net;
    if (init.mode == InitMode::Genesis) {
      net = attach_segmentation_head(*init.checkpoint, unet, scheme);
    } else {
      net = std::make_unique<UNet<float>>(unet, UNet<float>::Head::Segmentation);
      nn::init_weights(*net, scheme);
    }
    if (cfg.freeze_encoder)
      for (const auto& p : net->store().parameters())
        if (is_encoder_name(p->name)) p->requires_grad = false;
    result.model = std::move(net);
  } else {
    std::unique_ptr<EncoderClassifier<float>> net;
    if (init.mode == InitMode::Genesis) {
      net = attach_classification_head(extract_encoder(*init.checkpoint), unet, 1, cfg.fc_hidden, scheme);
    } else {
      net = std::make_unique<EncoderClassifier<float>>(unet, 1, cfg.fc_hidden);
      nn::init_weights(*net, scheme);
    }
    net->set_encoder_frozen(cfg.freeze_encoder);
    result.model = std::move(net);
  }
  nn::Network<float>& net = *result.model;
  net.set_mode(nn::Mode::Train);

  TrainLog& log = result.log;
  log.metric_name = data.kind == TaskKind::Segmentation ? "val_dice" : "val_auc";
  log.higher_is_better = true;
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

  double best = evaluate_task(net, data.kind, data.val);
  int best_epoch = 0;
  Checkpoint best_state = make_checkpoint(net);
  log.rows.push_back({0, std::numeric_limits<double>::quiet_NaN(), best, cfg.adam.lr, elapsed()});

  AdamState adam;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    order = subset;
    Rng order_rng(derive_seed(cfg.seed, kOrderStream, epoch));
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      if (e - b < 2) break;
      std::vector<SubVolume> images;
      std::vector<float> target;
      for (std::size_t k = b; k < e; ++k) {
        const TaskSample& s = data.train[order[k]];
        SubVolume img = s.image;
        std::vector<std::uint8_t> mask = s.mask;
        Rng aug(derive_seed(cfg.seed, kAugStream, epoch, order[k]));
        augment_target(img, data.kind == TaskKind::Segmentation ? &mask : nullptr, cfg.augment, aug);
        if (data.kind == TaskKind::Segmentation)
          target.insert(target.end(), mask.begin(), mask.end());
        else
          target.push_back(static_cast<float>(s.label));
        images.push_back(std::move(img));
      }
      std::vector<const SubVolume*> xs;
      for (const auto& im : images) xs.push_back(&im);
      nn::Tensor<float> input = to_tensor(xs);
      nn::Shape tshape = input.shape;
      if (data.kind == TaskKind::Classification) tshape = {images.size(), 1};

      net.store().zero_grad();
      nn::Tape<float> tape;
      const nn::Var x = tape.constant(std::move(input));
      const nn::Var y = tape.constant(nn::Tensor<float>(tshape, std::move(target)));
      const nn::Var pred = net.forward(tape, x);
      nn::Var loss;
      if (data.kind == TaskKind::Classification || cfg.seg_loss == SegLoss::Bce) {
        loss = nn::bce_loss(tape, pred, y);
      } else if (cfg.seg_loss == SegLoss::Dice) {
        loss = nn::dice_loss(tape, pred, y);
      } else {
        loss = nn::add(tape, nn::bce_loss(tape, pred, y), nn::dice_loss(tape, pred, y));
      }
      tape.backward(loss);
      adam_step(net.store(), adam, cfg.adam);
      loss_sum += tape.value(loss).data[0];
      ++batches;
    }
    if (batches == 0) throw Error("finetune: fewer than 2 training samples; cannot form a batch");

    const double val = evaluate_task(net, data.kind, data.val);
    log.rows.push_back({epoch, loss_sum / static_cast<double>(batches), val, cfg.adam.lr, elapsed()});
    if (val > best) {
      best = val;
      best_epoch = epoch;
      best_state = make_checkpoint(net);
    }
    if (epoch - best_epoch >= cfg.early_stop_patience) break;
  }
  load_into(net, best_state);
  return result;
}

}  // namespace genesis
