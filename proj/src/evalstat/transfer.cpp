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
#include <numeric>
#include <sstream>

#include "genesis/detail/bytes.hpp"
#include "genesis/experiments.hpp"

namespace genesis {

namespace {

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) s += (i ? "," : "") + std::to_string(seeds[i]);
  return s;
}

std::string join_values(const std::vector<double>& values) {
  std::string s;
  for (std::size_t i = 0; i < values.size(); ++i) s += (i ? "," : "") + fmt_double(values[i]);
  return s;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string item; std::getline(in, item, ',');) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

bool TransferPair::genesis_faster() const {
  return genesis_epochs && (!scratch_epochs || *genesis_epochs < *scratch_epochs);
}

std::string TransferStudy::to_csv() const {
  std::ostringstream os;
  os << "seed,scratch_epochs,genesis_epochs,scratch_best,combined_best,identity_best\n";
  auto ep = [](const std::optional<int>& e) { return e ? std::to_string(*e) : std::string(); };
  for (const auto& p : pairs)
    os << p.seed << ',' << ep(p.scratch_epochs) << ',' << ep(p.genesis_epochs) << ',' << fmt_double(p.scratch_best)
       << ',' << fmt_double(p.combined_best) << ',' << fmt_double(p.identity_best) << '\n';
  return os.str();
}

TransferStudy run_transfer_study(TransferBench& bench, double threshold, const std::vector<std::uint64_t>& seeds) {
  if (seeds.size() < 2) throw ConfigError("transfer study needs at least 2 seeds");
  const double fraction = bench.config().target.label_fraction;
  const std::string task = to_string(bench.config().task.kind);
  const std::string metric = bench.metric_name();

  TransferStudy study;
  study.threshold = threshold;
  study.scratch = {"scratch", task, metric, {}, {}};
  study.combined = {"genesis_combined", task, metric, {}, {}};
  study.identity = {"genesis_identity", task, metric, {}, {}};
  for (std::uint64_t seed : seeds) {
    const FinetuneResult s = bench.run(InitMode::Scratch, Scheme::Combined, seed, fraction);
    const FinetuneResult g = bench.run(InitMode::Genesis, Scheme::Combined, seed, fraction);
    const FinetuneResult i = bench.run(InitMode::Genesis, Scheme::Identity, seed, fraction);
    TransferPair p;
    p.seed = seed;
    p.scratch_epochs = s.log.epochs_to_reach(threshold);
    p.genesis_epochs = g.log.epochs_to_reach(threshold);
    p.scratch_best = s.log.best_metric();
    p.combined_best = g.log.best_metric();
    p.identity_best = i.log.best_metric();
    study.genesis_wins += p.genesis_faster() ? 1 : 0;
    for (auto [r, v] : {std::pair{&study.scratch, p.scratch_best}, std::pair{&study.combined, p.combined_best},
                        std::pair{&study.identity, p.identity_best}}) {
      r->values.push_back(v);
      r->seeds.push_back(seed);
    }
    study.pairs.push_back(p);
  }
  study.combined_vs_identity = ttest_independent(study.combined.values, study.identity.values);
  return study;
}

std::string bench_fingerprint(const BenchConfig& c) {
  std::ostringstream os;
  os << "unet=" << c.unet.base_channels << "/" << c.unet.depth << "/" << to_string(c.unet.upsample)
     << (c.unet.planar ? "/planar" : "") << " init=" << to_string(c.init_kind) << " corpus=" << c.corpus_volumes
     << "x" << to_string(c.phantom.dims) << "@" << c.phantom.seed << " proxy_crops=" << to_string(c.proxy_sampler.crop_shape)
     << "x" << c.proxy_sampler.n_per_volume << "@" << c.proxy_sampler.seed << " proxy_epochs=" << c.proxy.max_epochs
     << " proxy_batch=" << c.proxy.batch_size << " master_seed=" << c.proxy.master_seed
     << " task=" << to_string(c.task.kind) << (c.task.balanced ? "/balanced" : "") << "/" << c.task.n_volumes << "x" << to_string(c.task.sampler.crop_shape)
     << "x" << c.task.sampler.n_per_volume << "@" << c.task.seed << " target_epochs=" << c.target.max_epochs
     << " patience=" << c.target.early_stop_patience << " target_batch=" << c.target.batch_size
     << " seg_loss=" << to_string(c.target.seg_loss) << " fraction=" << fmt_double(c.target.label_fraction);
  return os.str();
}

std::string TransferCalibration::to_text() const {
  std::ostringstream os;
  os << "bench = " << bench << '\n'
     << "factor = " << fmt_double(factor) << '\n'
     << "calibration_seeds = " << join_seeds(calibration_seeds) << '\n'
     << "scratch_best = " << join_values(scratch_best) << '\n'
     << "threshold = " << fmt_double(threshold) << '\n'
     << "study_seeds = " << join_seeds(study_seeds) << '\n';
  return os.str();
}

TransferCalibration TransferCalibration::from_text(const std::string& text) {
  TransferCalibration c;
  std::istringstream in(text);
  int line_no = 0;
  bool have_threshold = false;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("calibration line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    try {
      if (key == "bench") {
        c.bench = value;
      } else if (key == "factor") {
        c.factor = std::stod(value);
      } else if (key == "threshold") {
        c.threshold = std::stod(value);
        have_threshold = true;
      } else if (key == "calibration_seeds" || key == "study_seeds") {
        auto& dst = key == "study_seeds" ? c.study_seeds : c.calibration_seeds;
        for (const auto& s : split_commas(value)) dst.push_back(std::stoull(s));
      } else if (key == "scratch_best") {
        for (const auto& s : split_commas(value)) c.scratch_best.push_back(std::stod(s));
      } else {
        throw ConfigError("unknown key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("calibration line " + std::to_string(line_no) + ": bad value for " + key);
    }
  }
  if (!have_threshold) throw ConfigError("calibration record has no threshold");
  for (auto s : c.study_seeds)
    if (std::find(c.calibration_seeds.begin(), c.calibration_seeds.end(), s) != c.calibration_seeds.end())
      throw ConfigError("study seed " + std::to_string(s) + " was used for calibration");
  return c;
}

TransferCalibration calibrate_transfer(TransferBench& bench, const std::vector<std::uint64_t>& calibration_seeds,
                                       double factor, const std::vector<std::uint64_t>& study_seeds) {
  if (calibration_seeds.empty()) throw ConfigError("calibration needs at least one seed");
  if (!(factor > 0.0 && factor <= 1.0)) throw ConfigError("calibration factor must be in (0, 1]");
  TransferCalibration c;
  c.bench = bench_fingerprint(bench.config());
  c.factor = factor;
  c.calibration_seeds = calibration_seeds;
  c.study_seeds = study_seeds;
  for (std::uint64_t seed : calibration_seeds)
    c.scratch_best.push_back(
        bench.run(InitMode::Scratch, Scheme::Combined, seed, bench.config().target.label_fraction).log.best_metric());
  const double mean =
      std::accumulate(c.scratch_best.begin(), c.scratch_best.end(), 0.0) / static_cast<double>(c.scratch_best.size());
  c.threshold = factor * mean;
  // Round-trip through the text form so the stored value is the one used.
  return TransferCalibration::from_text(c.to_text());
}

TransferCalibration load_transfer_calibration(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  if (!detail::slurp(path, bytes)) throw IoError("cannot read calibration record " + path.string());
  return TransferCalibration::from_text(std::string(bytes.begin(), bytes.end()));
}

}  // namespace genesis
