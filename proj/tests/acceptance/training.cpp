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

#include <cmath>
#include <vector>

#include "genesis/experiments.hpp"
#include "harness.hpp"

using namespace genesis;

namespace acceptance {

Outcome proxy_training() {
  Checks c;
  const BenchConfig bench = BenchConfig::toy();

  std::vector<Volume> volumes;
  for (std::uint64_t i = 0; i < 8; ++i) {
    PhantomSpec spec = bench.phantom;
    spec.seed = derive_seed(31, i);
    volumes.push_back(generate_phantom(spec));
  }
  ProxyTrainConfig cfg = bench.proxy;
  cfg.max_epochs = 30;
  cfg.master_seed = 5;
  cfg.threads = 1;
  cfg.scheduler = scheme_config(Scheme::Combined, cfg.scheduler);
  cfg.scheduler.receptive_field = receptive_field(bench.unet);
  const nn::InitScheme init{bench.init_kind, derive_seed(cfg.master_seed, 1)};

  const PretrainResult a = pretrain(volumes, bench.proxy_sampler, cfg, bench.unet, init);
  const PretrainResult b = pretrain(volumes, bench.proxy_sampler, cfg, bench.unet, init);

  const double epoch0 = a.log.rows.front().val_metric;
  const double best = a.log.best_metric();
  c.expect(a.log.rows.front().epoch == 0, "log does not start at epoch 0");
  c.expect(static_cast<int>(a.log.rows.size()) <= 31, "more than 30 training epochs");
  c.expect(best < 0.5 * epoch0, "best validation MSE not below half of epoch 0");
  c.expect(a.log.to_csv(false) == b.log.to_csv(false), "logs differ between identical runs");
  c.expect(encode_checkpoint(a.checkpoint) == encode_checkpoint(b.checkpoint), "checkpoints differ between identical runs");
  c.note("epoch0_val_mse", epoch0);
  c.note("best_val_mse", best);
  c.note("best_epoch", a.log.best_epoch());
  c.note("ratio", best / epoch0);
  return c.outcome();
}

}  // namespace acceptance
