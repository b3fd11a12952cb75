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
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "genesis/evalstat.hpp"
#include "genesis/trainer.hpp"

namespace genesis {

namespace {

constexpr std::uint64_t kValStream = 0x76616c;    // "val"
constexpr std::uint64_t kOrderStream = 0x6f7264;  // "ord"

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

nn::Tensor<float> to_tensor(const std::vector<const SubVolume*>& batch) {
  if (batch.empty()) throw ShapeError("to_tensor: empty batch");
  const Dims3 s = batch.front()->shape;
  nn::Tensor<float> t(nn::Shape{batch.size(), 1, s.z, s.y, s.x});
  std::size_t off = 0;
  for (const SubVolume* sv : batch) {
    if (sv->shape != s) throw ShapeError("to_tensor: crops differ in shape");
    std::copy(sv->data.begin(), sv->data.end(), t.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += sv->data.size();
  }
  return t;
}

void ProxyTrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("proxy.lr0 must be > 0");
  plateau.validate();
  if (batch_size < 2) throw ConfigError("proxy.batch_size must be >= 2 (batch normalization)");
  if (max_epochs < 1) throw ConfigError("proxy.max_epochs must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("proxy.val_fraction must be in (0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  scheduler.validate();
}

TrainingPair make_proxy_pair(const SubVolume& crop, const SchedulerConfig& cfg, std::uint64_t master_seed,
                             std::uint64_t epoch, std::uint64_t index) {
  Rng rng(derive_seed(master_seed, epoch, index));
  return apply_pipeline(crop, schedule(cfg, rng));
}

std::vector<TrainingPair> prepare_proxy_pairs(const std::vector<SubVolume>& crops,
                                              const std::vector<std::size_t>& indices, const SchedulerConfig& cfg,
                                              std::uint64_t master_seed, std::uint64_t epoch, int threads) {
  std::vector<TrainingPair> out(indices.size());
  auto job = [&](std::size_t k) { out[k] = make_proxy_pair(crops.at(indices[k]), cfg, master_seed, epoch, indices[k]); };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), indices.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < indices.size(); ++k) job(k);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < indices.size();) {
        try {
          job(k);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

namespace {

double validation_mse(UNet<float>& net, const std::vector<TrainingPair>& pairs, std::size_t batch) {
  net.set_mode(nn::Mode::Eval);
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < pairs.size(); b += batch) {
    const std::size_t e = std::min(pairs.size(), b + batch);
    std::vector<const SubVolume*> xs, ys;
    for (std::size_t i = b; i < e; ++i) {
      xs.push_back(&pairs[i].transformed);
      ys.push_back(&pairs[i].original);
    }
    const nn::Tensor<float> pred = net.predict(to_tensor(xs));
    const nn::Tensor<float> target = to_tensor(ys);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const double d = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
      ss += d * d;
    }
    count += pred.data.size();
  }
  net.set_mode(nn::Mode::Train);
  return ss / static_cast<double>(count);
}

}  // namespace

PretrainResult pretrain(const std::vector<Volume>& volumes, const SamplerConfig& sampler, const ProxyTrainConfig& cfg,
                        const UNetConfig& unet, const nn::InitScheme& init) {
  cfg.validate();
  sampler.validate();
  unet.validate();
  unet.validate_input(sampler.crop_shape);
  if (volumes.size() < 2) throw ConfigError("pretraining needs at least 2 volumes (train/validation split)");

  const std::size_t n = volumes.size();
  const std::size_t n_val =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(cfg.val_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<SubVolume> train_crops, val_crops;
  for (std::size_t i = 0; i < n; ++i) {
    SamplerConfig sc = sampler;
    sc.seed = derive_seed(sampler.seed, i);
    CropResult r = crop_subvolumes(volumes[i], sc, "vol" + std::to_string(i));
    auto& dst = i < n - n_val ? train_crops : val_crops;
    for (auto& c : r.crops) dst.push_back(std::move(c));
  }
  if (train_crops.empty()) throw Error("no informative crops in the training volumes");
  if (val_crops.empty()) throw Error("no informative crops in the validation volumes");

  std::vector<std::size_t> val_idx(val_crops.size());
  std::iota(val_idx.begin(), val_idx.end(), 0);
  const std::vector<TrainingPair> val_pairs =
      prepare_proxy_pairs(val_crops, val_idx, cfg.scheduler, derive_seed(cfg.master_seed, kValStream), 0, cfg.threads);

  UNet<float> net(unet, UNet<float>::Head::Restoration);
  nn::init_weights(net, init);

  auto metadata = [&] {
    auto meta = config_metadata(unet);
    meta.emplace_back("task", "proxy");
    meta.emplace_back("master_seed", std::to_string(cfg.master_seed));
    meta.emplace_back("init", to_string(init.kind));
    meta.emplace_back("scheduler.p_nonlinear", fmt_double(cfg.scheduler.p_nonlinear));
    meta.emplace_back("scheduler.p_shuffle", fmt_double(cfg.scheduler.p_shuffle));
    meta.emplace_back("scheduler.p_cutout", fmt_double(cfg.scheduler.p_cutout));
    meta.emplace_back("scheduler.p_inner_given_cutout", fmt_double(cfg.scheduler.p_inner_given_cutout));
    return meta;
  };

  PretrainResult result;
  result.log.metric_name = "val_mse";
  result.log.higher_is_better = false;
  const auto t0 = std::chrono::steady_clock::now();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  double lr = cfg.lr0;
  double best = validation_mse(net, val_pairs, batch);
  result.log.rows.push_back({0, std::numeric_limits<double>::quiet_NaN(), best, lr, seconds_since(t0)});
  result.checkpoint = make_checkpoint(net, metadata());
  int best_epoch = 0;

  std::vector<std::size_t> order(train_crops.size());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(derive_seed(cfg.master_seed, kOrderStream, epoch));
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      const std::size_t e = std::min(order.size(), b + batch);
      if (e - b < 2) break;  // batch normalization needs two samples
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                         order.begin() + static_cast<std::ptrdiff_t>(e));
      const auto pairs = prepare_proxy_pairs(train_crops, idx, cfg.scheduler, cfg.master_seed,
                                             static_cast<std::uint64_t>(epoch), cfg.threads);
      std::vector<const SubVolume*> xs, ys;
      for (const auto& p : pairs) {
        xs.push_back(&p.transformed);
        ys.push_back(&p.original);
      }
      net.store().zero_grad();
      nn::Tape<float> tape;
      const nn::Var x = tape.constant(to_tensor(xs));
      const nn::Var y = tape.constant(to_tensor(ys));
      const nn::Var loss = nn::mse_loss(tape, net.forward(tape, x), y);
      tape.backward(loss);
      sgd_step(net.store(), lr);
      loss_sum += tape.value(loss).data[0];
      ++batches;
    }
    if (batches == 0) throw Error("fewer than 2 training crops; cannot form a batch");

    const double val = validation_mse(net, val_pairs, batch);
    result.log.rows.push_back({epoch, loss_sum / static_cast<double>(batches), val, lr, seconds_since(t0)});
    if (val < best) {
      best = val;
      best_epoch = epoch;
      result.checkpoint = make_checkpoint(net, metadata());
    }
    lr = reduce_lr_on_plateau(result.log, cfg.plateau);
  }
  result.checkpoint.set_meta("best_epoch", std::to_string(best_epoch));
  result.checkpoint.set_meta("best_val_mse", fmt_double(best));
  return result;
}

}  // namespace genesis
