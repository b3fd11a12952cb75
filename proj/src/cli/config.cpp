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

#include <charconv>
#include <concepts>
#include <fstream>
#include <functional>
#include <sstream>

#include "genesis/cli.hpp"

namespace genesis::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, ',')) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw ConfigError("not a valid number: '" + s + "'");
  return v;
}

// Value codecs, one overload pair per field type.
std::string fmt(int v) { return std::to_string(v); }
template <typename T>
concept Count = std::unsigned_integral<T> && !std::same_as<T, bool>;

template <Count T>
std::string fmt(T v) { return std::to_string(v); }
std::string fmt(double v) { return fmt_double(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(const std::string& v) { return v; }
std::string fmt(const std::filesystem::path& v) { return v.string(); }
std::string fmt(const Dims3& v) { return to_string(v); }
std::string fmt(const Spacing3& v) {
  return fmt_double(v[0]) + "," + fmt_double(v[1]) + "," + fmt_double(v[2]);
}
std::string fmt(Scheme v) { return to_string(v); }
std::string fmt(InitMode v) { return to_string(v); }
std::string fmt(TaskKind v) { return to_string(v); }
std::string fmt(SegLoss v) { return to_string(v); }
std::string fmt(nn::InitKind v) { return nn::to_string(v); }
std::string fmt(UpsampleMode v) { return to_string(v); }
std::string fmt(MonotoneMode v) { return v == MonotoneMode::Strict ? "strict" : "sort_by_x"; }
std::string fmt(const std::optional<Scheme>& v) { return v ? to_string(*v) : "custom"; }
template <typename T>
std::string fmt(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

void parse(int& v, const std::string& s) { v = parse_number<int>(s); }
template <Count T>
void parse(T& v, const std::string& s) { v = parse_number<T>(s); }
void parse(double& v, const std::string& s) { v = parse_number<double>(s); }
void parse(bool& v, const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") {
    v = true;
  } else if (s == "false" || s == "0" || s == "no") {
    v = false;
  } else {
    throw ConfigError("not a boolean: '" + s + "'");
  }
}
void parse(std::string& v, const std::string& s) { v = s; }
void parse(std::filesystem::path& v, const std::string& s) { v = s; }
void parse(Dims3& v, const std::string& s) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, 'x')) parts.push_back(trim(cur));
  if (parts.size() != 3) throw ConfigError("expected XxYxZ, got '" + s + "'");
  v = {parse_number<std::size_t>(parts[0]), parse_number<std::size_t>(parts[1]), parse_number<std::size_t>(parts[2])};
}
void parse(Spacing3& v, const std::string& s) {
  const auto parts = split_list(s);
  if (parts.size() != 3) throw ConfigError("expected three comma-separated spacings, got '" + s + "'");
  for (std::size_t i = 0; i < 3; ++i) v[i] = parse_number<float>(parts[i]);
}
void parse(Scheme& v, const std::string& s) { v = parse_scheme(s); }
void parse(InitMode& v, const std::string& s) { v = parse_init_mode(s); }
void parse(TaskKind& v, const std::string& s) { v = parse_task_kind(s); }
void parse(SegLoss& v, const std::string& s) { v = parse_seg_loss(s); }
void parse(nn::InitKind& v, const std::string& s) { v = nn::parse_init_kind(s); }
void parse(UpsampleMode& v, const std::string& s) { v = parse_upsample_mode(s); }
void parse(MonotoneMode& v, const std::string& s) {
  if (s == "strict") {
    v = MonotoneMode::Strict;
  } else if (s == "sort_by_x") {
    v = MonotoneMode::SortByX;
  } else {
    throw ConfigError("unknown monotone mode '" + s + "' (expected sort_by_x or strict)");
  }
}
void parse(std::optional<Scheme>& v, const std::string& s) {
  if (s == "custom") {
    v.reset();
  } else {
    v = parse_scheme(s);
  }
}
template <typename T>
void parse(std::vector<T>& v, const std::string& s) {
  v.clear();
  for (const auto& item : split_list(s)) {
    T x{};
    parse(x, item);
    v.push_back(x);
  }
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

// `ref` is a generic lambda returning a reference to the field.
template <typename F>
Key field(std::string name, F ref) {
  return {std::move(name), [ref](const RunConfig& c) { return fmt(ref(c)); },
          [ref](RunConfig& c, const std::string& s) { parse(ref(c), s); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(field("seed", [](auto& c) -> auto& { return c.seed; }));
    k.push_back(field("threads", [](auto& c) -> auto& { return c.threads; }));
    k.push_back(field("out", [](auto& c) -> auto& { return c.out; }));

    k.push_back(field("phantom.count", [](auto& c) -> auto& { return c.bench.corpus_volumes; }));
    k.push_back(field("phantom.dims", [](auto& c) -> auto& { return c.bench.phantom.dims; }));
    k.push_back(field("phantom.ellipsoids", [](auto& c) -> auto& { return c.bench.phantom.n_ellipsoids; }));
    k.push_back(field("phantom.texture_scale", [](auto& c) -> auto& { return c.bench.phantom.texture_scale; }));
    k.push_back(field("phantom.background_level", [](auto& c) -> auto& { return c.bench.phantom.background_level; }));
    k.push_back(field("phantom.seed", [](auto& c) -> auto& { return c.bench.phantom.seed; }));

    k.push_back(field("sampler.crop", [](auto& c) -> auto& { return c.bench.proxy_sampler.crop_shape; }));
    k.push_back(field("sampler.per_volume", [](auto& c) -> auto& { return c.bench.proxy_sampler.n_per_volume; }));
    k.push_back(field("sampler.air_max", [](auto& c) -> auto& { return c.bench.proxy_sampler.air_value_max; }));
    k.push_back(field("sampler.tissue_min", [](auto& c) -> auto& { return c.bench.proxy_sampler.tissue_value_min; }));
    k.push_back(
        field("sampler.reject_fraction", [](auto& c) -> auto& { return c.bench.proxy_sampler.reject_fraction; }));
    k.push_back(
        field("sampler.max_attempts", [](auto& c) -> auto& { return c.bench.proxy_sampler.max_attempts_per_crop; }));
    k.push_back(field("sampler.seed", [](auto& c) -> auto& { return c.bench.proxy_sampler.seed; }));

    k.push_back(field("scheduler.scheme", [](auto& c) -> auto& { return c.scheme; }));
    k.push_back(field("scheduler.p_nonlinear", [](auto& c) -> auto& { return c.bench.proxy.scheduler.p_nonlinear; }));
    k.push_back(field("scheduler.p_shuffle", [](auto& c) -> auto& { return c.bench.proxy.scheduler.p_shuffle; }));
    k.push_back(field("scheduler.p_cutout", [](auto& c) -> auto& { return c.bench.proxy.scheduler.p_cutout; }));
    k.push_back(field("scheduler.p_inner_given_cutout",
                      [](auto& c) -> auto& { return c.bench.proxy.scheduler.p_inner_given_cutout; }));
    k.push_back(field("scheduler.p_decreasing", [](auto& c) -> auto& { return c.bench.proxy.scheduler.p_decreasing; }));
    k.push_back(
        field("scheduler.monotone_mode", [](auto& c) -> auto& { return c.bench.proxy.scheduler.monotone_mode; }));
    k.push_back(
        field("scheduler.lut_resolution", [](auto& c) -> auto& { return c.bench.proxy.scheduler.lut_resolution; }));
    k.push_back(
        field("scheduler.shuffle_windows", [](auto& c) -> auto& { return c.bench.proxy.scheduler.shuffle_n_windows; }));
    k.push_back(field("scheduler.shuffle_max_extent",
                      [](auto& c) -> auto& { return c.bench.proxy.scheduler.shuffle_max_extent; }));
    k.push_back(field("scheduler.cutout_max_windows",
                      [](auto& c) -> auto& { return c.bench.proxy.scheduler.cutout_max_windows; }));
    k.push_back(field("scheduler.cutout_max_fraction",
                      [](auto& c) -> auto& { return c.bench.proxy.scheduler.cutout_max_fraction; }));
    k.push_back(field("scheduler.cutout_max_retries",
                      [](auto& c) -> auto& { return c.bench.proxy.scheduler.cutout_max_retries; }));

    k.push_back(field("model.base_channels", [](auto& c) -> auto& { return c.bench.unet.base_channels; }));
    k.push_back(field("model.depth", [](auto& c) -> auto& { return c.bench.unet.depth; }));
    k.push_back(field("model.planar", [](auto& c) -> auto& { return c.bench.unet.planar; }));
    k.push_back(field("model.upsample", [](auto& c) -> auto& { return c.bench.unet.upsample; }));
    k.push_back(field("model.init", [](auto& c) -> auto& { return c.bench.init_kind; }));

    k.push_back(field("proxy.lr0", [](auto& c) -> auto& { return c.bench.proxy.lr0; }));
    k.push_back(field("proxy.plateau_factor", [](auto& c) -> auto& { return c.bench.proxy.plateau.factor; }));
    k.push_back(field("proxy.plateau_patience", [](auto& c) -> auto& { return c.bench.proxy.plateau.patience; }));
    k.push_back(field("proxy.min_lr", [](auto& c) -> auto& { return c.bench.proxy.plateau.min_lr; }));
    k.push_back(field("proxy.batch_size", [](auto& c) -> auto& { return c.bench.proxy.batch_size; }));
    k.push_back(field("proxy.max_epochs", [](auto& c) -> auto& { return c.bench.proxy.max_epochs; }));
    k.push_back(field("proxy.val_fraction", [](auto& c) -> auto& { return c.bench.proxy.val_fraction; }));
    k.push_back(field("proxy.data", [](auto& c) -> auto& { return c.data_dir; }));

    k.push_back(field("target.task", [](auto& c) -> auto& { return c.bench.task.kind; }));
    k.push_back(field("target.balanced", [](auto& c) -> auto& { return c.bench.task.balanced; }));
    k.push_back(field("target.volumes", [](auto& c) -> auto& { return c.bench.task.n_volumes; }));
    k.push_back(field("target.crop", [](auto& c) -> auto& { return c.bench.task.sampler.crop_shape; }));
    k.push_back(field("target.per_volume", [](auto& c) -> auto& { return c.bench.task.sampler.n_per_volume; }));
    k.push_back(field("target.val_fraction", [](auto& c) -> auto& { return c.bench.task.val_fraction; }));
    k.push_back(field("target.task_seed", [](auto& c) -> auto& { return c.bench.task.seed; }));
    k.push_back(field("target.seg_loss", [](auto& c) -> auto& { return c.bench.target.seg_loss; }));
    k.push_back(field("target.lr", [](auto& c) -> auto& { return c.bench.target.adam.lr; }));
    k.push_back(field("target.patience", [](auto& c) -> auto& { return c.bench.target.early_stop_patience; }));
    k.push_back(field("target.batch_size", [](auto& c) -> auto& { return c.bench.target.batch_size; }));
    k.push_back(field("target.max_epochs", [](auto& c) -> auto& { return c.bench.target.max_epochs; }));
    k.push_back(field("target.label_fraction", [](auto& c) -> auto& { return c.bench.target.label_fraction; }));
    k.push_back(field("target.freeze_encoder", [](auto& c) -> auto& { return c.bench.target.freeze_encoder; }));
    k.push_back(field("target.fc_hidden", [](auto& c) -> auto& { return c.bench.target.fc_hidden; }));
    k.push_back(field("target.flip", [](auto& c) -> auto& { return c.bench.target.augment.flip; }));
    k.push_back(field("target.transpose", [](auto& c) -> auto& { return c.bench.target.augment.transpose; }));
    k.push_back(field("target.rotate", [](auto& c) -> auto& { return c.bench.target.augment.rotate; }));
    k.push_back(field("target.noise", [](auto& c) -> auto& { return c.bench.target.augment.noise; }));
    k.push_back(field("target.noise_sigma", [](auto& c) -> auto& { return c.bench.target.augment.noise_sigma; }));
    k.push_back(field("target.init", [](auto& c) -> auto& { return c.init; }));
    k.push_back(field("target.checkpoint", [](auto& c) -> auto& { return c.checkpoint; }));

    k.push_back(field("eval.trials", [](auto& c) -> auto& { return c.eval.trials; }));
    k.push_back(field("eval.schemes", [](auto& c) -> auto& { return c.eval.schemes; }));
    k.push_back(field("eval.fractions", [](auto& c) -> auto& { return c.eval.fractions; }));
    k.push_back(field("eval.inits", [](auto& c) -> auto& { return c.eval.inits; }));
    k.push_back(field("eval.sweep_scheme", [](auto& c) -> auto& { return c.eval.sweep_scheme; }));

    k.push_back(field("ingest.normalize", [](auto& c) -> auto& { return c.ingest.normalize; }));
    k.push_back(field("ingest.raw_dims", [](auto& c) -> auto& { return c.ingest.raw_dims; }));
    k.push_back(field("ingest.raw_dtype", [](auto& c) -> auto& { return c.ingest.raw_dtype; }));
    k.push_back(field("ingest.raw_spacing", [](auto& c) -> auto& { return c.ingest.raw_spacing; }));
    return k;
  }();
  return table;
}

}  // namespace

SchedulerConfig RunConfig::scheduler() const {
  SchedulerConfig s = scheme ? scheme_config(*scheme, bench.proxy.scheduler) : bench.proxy.scheduler;
  s.receptive_field = receptive_field(bench.unet);
  return s;
}

BenchConfig RunConfig::resolved_bench() const {
  BenchConfig b = bench;
  b.proxy.master_seed = seed;
  b.proxy.threads = threads;
  b.proxy.scheduler.receptive_field = receptive_field(b.unet);
  b.task.phantom = b.phantom;  // task phantoms draw their own seeds
  b.target.seed = seed;
  return b;
}

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (out.empty()) throw ConfigError("out must not be empty");
  // Raw probabilities are checked even when a scheme preset replaces them.
  SchedulerConfig raw = bench.proxy.scheduler;
  raw.receptive_field = receptive_field(bench.unet);
  raw.validate();
  scheduler().validate();
  resolved_bench().validate();
  if (eval.trials < 2) throw ConfigError("eval.trials must be >= 2");
  if (eval.schemes.size() < 2) throw ConfigError("eval.schemes needs at least two schemes");
  validate_fractions(eval.fractions);
  if (eval.inits.empty()) throw ConfigError("eval.inits must not be empty");
  if (ingest.normalize != "ct" && ingest.normalize != "minmax" && ingest.normalize != "none")
    throw ConfigError("ingest.normalize must be ct, minmax or none");
  if (ingest.raw_dtype != "f32" && ingest.raw_dtype != "i16") throw ConfigError("ingest.raw_dtype must be f32 or i16");
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (k.name == key) {
      try {
        k.set(cfg, value);
      } catch (const Error& e) {
        throw ConfigError(key + ": " + e.what());
      }
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  for (int lineno = 1; std::getline(is, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_setting(base, trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string dump_config(const RunConfig& cfg) {
  std::string s;
  for (const auto& k : keys()) s += k.name + " = " + k.get(cfg) + "\n";
  return s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const auto& k : keys()) names.push_back(k.name);
  return names;
}

}  // namespace genesis::cli
