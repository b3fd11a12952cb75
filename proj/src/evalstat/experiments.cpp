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
#include <limits>
#include <numeric>
#include <sstream>

#include "genesis/experiments.hpp"

namespace genesis {

namespace {

constexpr std::uint64_t kInitStream = 0x696e69;  // "ini"

std::string init_method(InitMode mode, Scheme scheme) {
  return mode == InitMode::Scratch ? "scratch" : std::string("genesis_") + to_string(scheme);
}

std::string fraction_str(double f) { return fmt_double(f); }

}  // namespace

BenchConfig BenchConfig::toy() {
  BenchConfig c;
  c.unet = UNetConfig::toy();
  c.corpus_volumes = 24;
  c.phantom.seed = 1000;
  c.proxy_sampler.crop_shape = UNetConfig::kToyInput;
  c.proxy_sampler.n_per_volume = 32;
  c.proxy_sampler.seed = 7;
  c.proxy.max_epochs = 20;
  c.proxy.master_seed = 1;
  c.task.kind = TaskKind::Segmentation;
  c.task.n_volumes = 8;
  c.task.sampler.crop_shape = UNetConfig::kToyInput;
  c.task.sampler.n_per_volume = 16;
  c.task.seed = 555;
  c.target.max_epochs = 30;
  c.target.label_fraction = 0.25;
  return c;
}

void BenchConfig::validate() const {
  unet.validate();
  try {
    unet.validate_input(proxy_sampler.crop_shape);
    unet.validate_input(task.sampler.crop_shape);
  } catch (const ShapeError& e) {
    throw ConfigError(std::string("crop shape: ") + e.what());
  }
  if (corpus_volumes < 2) throw ConfigError("bench.corpus_volumes must be >= 2");
  phantom.validate();
  proxy_sampler.validate();
  ProxyTrainConfig p = proxy;
  p.scheduler.receptive_field = receptive_field(unet);
  p.validate();
  task.validate();
  target.validate();
}

TransferBench::TransferBench(BenchConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.proxy.scheduler.receptive_field = receptive_field(cfg_.unet);
  cfg_.validate();
}

const TaskDataset& TransferBench::task() {
  if (!task_) task_ = make_synthetic_task(cfg_.task);
  return *task_;
}

const std::vector<Volume>& TransferBench::corpus() {
  if (!corpus_) {
    std::vector<Volume> vols;
    for (int i = 0; i < cfg_.corpus_volumes; ++i) {
      PhantomSpec p = cfg_.phantom;
      p.seed = derive_seed(cfg_.phantom.seed, static_cast<std::uint64_t>(i));
      vols.push_back(generate_phantom(p));
    }
    corpus_ = std::move(vols);
  }
  return *corpus_;
}

const PretrainResult& TransferBench::pretrained(Scheme scheme) {
  auto it = pretrained_.find(scheme);
  if (it == pretrained_.end()) {
    ProxyTrainConfig p = cfg_.proxy;
    p.scheduler = scheme_config(scheme, cfg_.proxy.scheduler);
    const nn::InitScheme init{cfg_.init_kind, derive_seed(p.master_seed, kInitStream)};
    set_pretrained(scheme, pretrain(corpus(), cfg_.proxy_sampler, p, cfg_.unet, init));
    it = pretrained_.find(scheme);
  }
  return it->second;
}

void TransferBench::set_pretrained(Scheme scheme, PretrainResult result) {
  checkpoints_[scheme] = std::make_shared<const Checkpoint>(result.checkpoint);
  pretrained_[scheme] = std::move(result);
}

FinetuneResult TransferBench::run(InitMode mode, Scheme scheme, std::uint64_t seed, double label_fraction) {
  ModelInit init;
  init.mode = mode;
  init.kind = cfg_.init_kind;
  if (mode == InitMode::Genesis) {
    pretrained(scheme);
    init.checkpoint = checkpoints_.at(scheme);
  }
  TargetTrainConfig t = cfg_.target;
  t.seed = seed;
  t.label_fraction = label_fraction;
  return finetune(task(), t, cfg_.unet, init);
}

std::string TransferBench::metric_name() const {
  return cfg_.task.kind == TaskKind::Segmentation ? "dice" : "auc";
}

std::vector<std::pair<std::string, std::string>> statistics_metadata() {
  return {{"ttest", "pooled-variance Student, two-sided, alpha 0.05"},
          {"ci95", "normal approximation, 1.96 * sd / sqrt(n)"},
          {"sd", "sample standard deviation (n - 1)"},
          {"empty_masks", "dice and iou are 1 when both masks are empty"}};
}

std::vector<Scheme> all_schemes() {
  return {Scheme::Identity,    Scheme::NonLinear,   Scheme::LocalShuffle,
          Scheme::OuterCutout, Scheme::InnerCutout, Scheme::Combined};
}

namespace {

Comparison compare(const TrialResult& a, const TrialResult& b) {
  return {a.method, b.method, ttest_independent(a.values, b.values)};
}

std::string comparison_row(const std::string& name, const Comparison& c) {
  std::ostringstream os;
  os << name << ',' << c.a << ',' << c.b << ',' << fmt_double(c.test.t) << ',' << fmt_double(c.test.p) << ','
     << fmt_double(c.test.dof) << ',' << (c.test.significant ? 1 : 0) << ',' << (c.test.degenerate ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace

std::string AblationTable::to_csv() const { return trials_csv(rows); }

std::string AblationTable::tests_csv() const {
  return "comparison,a,b,t,p,dof,significant,degenerate\n" + comparison_row("top_two", top_two) +
         comparison_row("bottom_two", bottom_two);
}

std::vector<PlotPoint> AblationTable::plot() const {
  std::vector<PlotPoint> pts;
  for (std::size_t i = 0; i < rows.size(); ++i)
    pts.push_back({rows[i].method, static_cast<double>(i), rows[i].mean(), rows[i].ci_half_width()});
  return pts;
}

AblationTable ablation_matrix(TransferBench& bench, const std::vector<Scheme>& schemes, int n,
                              std::uint64_t base_seed) {
  if (schemes.size() < 2) throw ConfigError("ablation needs at least two schemes");
  for (std::size_t i = 0; i < schemes.size(); ++i)
    for (std::size_t j = i + 1; j < schemes.size(); ++j)
      if (schemes[i] == schemes[j]) throw ConfigError(std::string("ablation lists scheme twice: ") + to_string(schemes[i]));

  AblationTable table;
  table.task = to_string(bench.config().task.kind);
  table.metric = bench.metric_name();
  const double fraction = bench.config().target.label_fraction;
  for (Scheme s : schemes) {
    bench.pretrained(s);
    table.rows.push_back(run_trials(
        [&](std::uint64_t seed) { return bench.run(InitMode::Genesis, s, seed, fraction).log.best_metric(); }, n,
        base_seed, to_string(s), table.task, table.metric));
  }

  std::vector<std::size_t> rank(table.rows.size());
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(),
                   [&](std::size_t a, std::size_t b) { return table.rows[a].mean() > table.rows[b].mean(); });
  const std::size_t m = rank.size();
  table.top_two = compare(table.rows[rank[0]], table.rows[rank[1]]);
  table.bottom_two = compare(table.rows[rank[m - 2]], table.rows[rank[m - 1]]);
  return table;
}

void validate_fractions(const std::vector<double>& fractions) {
  if (fractions.empty()) throw ConfigError("sweep needs at least one label fraction");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0 && fractions[i] <= 1.0)) throw ConfigError("label fractions must lie in (0, 1]");
    if (i > 0 && !(fractions[i] > fractions[i - 1]))
      throw ConfigError("label fractions must be strictly increasing");
  }
}

const SweepCell& SweepTable::cell(std::size_t f, std::size_t i) const {
  if (f >= fractions.size() || i >= inits.size()) throw Error("sweep cell index out of range");
  return cells.at(f * inits.size() + i);
}

double SweepTable::reference_mean() const {
  if (reference.empty()) throw Error("sweep has no reference rows");
  for (std::size_t i = 0; i < inits.size(); ++i)
    if (inits[i] == InitMode::Scratch) return reference[i].mean();
  return reference.front().mean();
}

std::optional<double> SweepTable::savings_fraction() const {
  const auto s = std::find(inits.begin(), inits.end(), InitMode::Scratch);
  const auto g = std::find(inits.begin(), inits.end(), InitMode::Genesis);
  if (s == inits.end() || g == inits.end()) return std::nullopt;
  const double target = reference[static_cast<std::size_t>(s - inits.begin())].mean();
  for (std::size_t f = 0; f < fractions.size(); ++f)
    if (cell(f, static_cast<std::size_t>(g - inits.begin())).result.mean() >= target) return fractions[f];
  return std::nullopt;
}

std::vector<ShortfallRow> SweepTable::shortfall() const {
  const double ref = reference_mean();
  std::vector<ShortfallRow> out;
  for (std::size_t i = 0; i < inits.size(); ++i) {
    double env = -std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      const double m = cell(f, i).result.mean();
      env = std::max(env, m);
      out.push_back({fractions[f], inits[i], m, env, std::max(0.0, ref - env)});
    }
  }
  return out;
}

std::string SweepTable::to_csv() const {
  std::ostringstream os;
  os << "fraction,init,n,mean,sd,ci95\n";
  auto row = [&](const std::string& f, InitMode init, const TrialResult& r) {
    os << f << ',' << to_string(init) << ',' << r.values.size() << ',' << fmt_double(r.mean()) << ','
       << fmt_double(r.sd()) << ',' << fmt_double(r.ci_half_width()) << '\n';
  };
  for (const auto& c : cells) row(fraction_str(c.fraction), c.init, c.result);
  for (std::size_t i = 0; i < reference.size(); ++i) row("full", inits[i], reference[i]);
  return os.str();
}

std::string SweepTable::shortfall_csv() const {
  std::ostringstream os;
  os << "fraction,init,mean,envelope,shortfall\n";
  for (const auto& r : shortfall())
    os << fraction_str(r.fraction) << ',' << to_string(r.init) << ',' << fmt_double(r.mean) << ','
       << fmt_double(r.envelope) << ',' << fmt_double(r.shortfall) << '\n';
  return os.str();
}

std::vector<PlotPoint> SweepTable::plot() const {
  std::vector<PlotPoint> pts;
  for (const auto& c : cells) pts.push_back({to_string(c.init), c.fraction, c.result.mean(), c.result.ci_half_width()});
  for (std::size_t i = 0; i < reference.size(); ++i)
    pts.push_back({std::string(to_string(inits[i])) + "_full", 1.0, reference[i].mean(), reference[i].ci_half_width()});
  return pts;
}

SweepTable annotation_sweep(TransferBench& bench, const std::vector<double>& fractions,
                            const std::vector<InitMode>& inits, int n, std::uint64_t base_seed, Scheme scheme) {
  validate_fractions(fractions);
  if (inits.empty()) throw ConfigError("sweep needs at least one init");
  for (std::size_t i = 0; i < inits.size(); ++i)
    for (std::size_t j = i + 1; j < inits.size(); ++j)
      if (inits[i] == inits[j]) throw ConfigError(std::string("sweep lists init twice: ") + to_string(inits[i]));

  SweepTable table;
  table.task = to_string(bench.config().task.kind);
  table.metric = bench.metric_name();
  table.fractions = fractions;
  table.inits = inits;
  table.scheme = scheme;

  auto trials = [&](InitMode init, double fraction, std::vector<std::vector<std::string>>* ids) {
    return run_trials(
        [&](std::uint64_t seed) {
          FinetuneResult r = bench.run(init, scheme, seed, fraction);
          if (ids) ids->push_back(std::move(r.train_ids));
          return r.log.best_metric();
        },
        n, base_seed, init_method(init, scheme), table.task, table.metric);
  };

  for (double f : fractions) {
    for (InitMode init : inits) {
      SweepCell c;
      c.fraction = f;
      c.init = init;
      c.result = trials(init, f, &c.train_ids);
      table.cells.push_back(std::move(c));
    }
  }
  for (std::size_t i = 0; i < inits.size(); ++i) {
    if (fractions.back() == 1.0) {
      table.reference.push_back(table.cell(fractions.size() - 1, i).result);
    } else {
      table.reference.push_back(trials(inits[i], 1.0, nullptr));
    }
  }
  return table;
}

std::string trial_values_csv(const std::vector<TrialResult>& results) {
  std::ostringstream os;
  os << "method,task,metric,trial,seed,value\n";
  for (const auto& r : results)
    for (std::size_t i = 0; i < r.values.size(); ++i)
      os << r.method << ',' << r.task << ',' << r.metric << ',' << i << ',' << r.seeds.at(i) << ','
         << fmt_double(r.values[i]) << '\n';
  return os.str();
}

}  // namespace genesis
