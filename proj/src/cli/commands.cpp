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
#include <cmath>
#include <cstdio>
#include <sstream>

#include "genesis/cli.hpp"
#include "genesis/detail/bytes.hpp"

namespace genesis::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 0x696e69;     // "ini"
constexpr std::uint64_t kPreviewStream = 0x707276;  // "prv"

void write_text(const fs::path& path, const std::string& text) {
  detail::spit(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const fs::path& path) {
  std::vector<std::uint8_t> bytes;
  if (!detail::slurp(path, bytes)) throw IoError("cannot open " + path.string());
  return std::string(bytes.begin(), bytes.end());
}

fs::path prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
  // The output location is left out so reruns elsewhere stay byte-identical.
  std::string dump = dump_config(cfg);
  const auto line = dump.find("\nout = ") + 1;
  dump.erase(line, dump.find('\n', line) + 1 - line);
  write_text(cfg.out / "config.txt", dump);
  return cfg.out;
}

std::string kv_lines(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::string s;
  for (const auto& [k, v] : kv) s += k + " = " + v + "\n";
  return s;
}

std::vector<Volume> load_volumes(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) {
    TransferBench bench(cfg.resolved_bench());
    return bench.corpus();
  }
  std::error_code ec;
  if (!fs::is_directory(cfg.data_dir, ec)) throw IoError("proxy.data is not a directory: " + cfg.data_dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(cfg.data_dir))
    if (e.path().extension() == ".mvol") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .mvol files in " + cfg.data_dir.string());
  std::vector<Volume> vols;
  for (const auto& f : files) {
    Volume v = read_mvol(f);
    if (v.domain() != IntensityDomain::Unit) throw IoError(f.string() + " is not normalized; run ingest first");
    vols.push_back(std::move(v));
  }
  return vols;
}

std::vector<float> central_slice(const SubVolume& sv) {
  const std::size_t z = sv.shape.z / 2;
  const auto begin = sv.data.begin() + static_cast<std::ptrdiff_t>(sv.shape.x * sv.shape.y * z);
  return {begin, begin + static_cast<std::ptrdiff_t>(sv.shape.x * sv.shape.y)};
}

Volume read_raw(const fs::path& path, const IngestConfig& ic) {
  if (ic.raw_dims.count() == 0) throw ConfigError("ingest.raw_dims is required for raw input " + path.string());
  std::vector<std::uint8_t> bytes;
  if (!detail::slurp(path, bytes)) throw IoError("cannot open " + path.string());
  const std::size_t width = ic.raw_dtype == "i16" ? 2 : 4;
  if (bytes.size() != ic.raw_dims.count() * width)
    throw IoError(path.string() + ": expected " + std::to_string(ic.raw_dims.count() * width) + " bytes, found " +
                  std::to_string(bytes.size()));
  detail::ByteReader r(bytes);
  std::vector<float> data(ic.raw_dims.count());
  for (float& v : data) v = width == 2 ? static_cast<float>(r.i16()) : r.f32();
  return Volume(ic.raw_dims, std::move(data), ic.raw_spacing, IntensityDomain::Hounsfield);
}

// Minimal CSV reader for the tables this tool writes.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name, const fs::path& src) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw IoError(src.string() + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

Table read_table(const fs::path& path) {
  std::istringstream is(read_text(path));
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty table");
  t.header = split_csv(line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = split_csv(line);
    if (cells.size() != t.header.size()) throw IoError(path.string() + ": ragged row '" + line + "'");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

double to_double(const std::string& s, const fs::path& src) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw IoError(src.string() + ": bad number '" + s + "'");
  }
}

}  // namespace

std::vector<std::uint8_t> montage_pgm(const std::vector<std::vector<float>>& tiles, std::size_t width,
                                      std::size_t height, std::size_t columns) {
  constexpr std::size_t gap = 2;
  if (tiles.empty() || columns == 0 || width == 0 || height == 0) throw ShapeError("montage: nothing to draw");
  for (const auto& t : tiles)
    if (t.size() != width * height) throw ShapeError("montage: tile size mismatch");
  const std::size_t cols = std::min(columns, tiles.size());
  const std::size_t rows = (tiles.size() + cols - 1) / cols;
  const std::size_t w = cols * width + (cols - 1) * gap;
  const std::size_t h = rows * height + (rows - 1) * gap;
  std::vector<std::uint8_t> px(w * h, 255);
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const std::size_t ox = (k % cols) * (width + gap), oy = (k / cols) * (height + gap);
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        const double v = std::clamp(static_cast<double>(tiles[k][y * width + x]), 0.0, 1.0);
        px[(oy + y) * w + ox + x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  }
  const std::string head = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

std::string cmd_phantom(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  TransferBench bench(cfg.resolved_bench());
  const auto& vols = bench.corpus();
  for (std::size_t i = 0; i < vols.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "phantom_%03zu.mvol", i);
    write_mvol(vols[i], out / name);
  }
  return "wrote " + std::to_string(vols.size()) + " phantoms to " + out.string();
}

std::string cmd_ingest(const RunConfig& cfg, const std::vector<fs::path>& inputs) {
  cfg.validate();
  if (inputs.empty()) throw ConfigError("ingest needs at least one input file");
  const fs::path out = prepare_out(cfg);
  for (const auto& in : inputs) {
    Volume v = in.extension() == ".nii" ? read_nifti1(in) : read_raw(in, cfg.ingest);
    if (cfg.ingest.normalize == "ct") {
      v = normalize_ct(v);
    } else if (cfg.ingest.normalize == "minmax") {
      v = normalize_minmax(v);
    } else {
      v = Volume(v.dims(), std::vector<float>(v.data().begin(), v.data().end()), v.spacing(), IntensityDomain::Unit);
    }
    write_mvol(v, out / (in.stem().string() + ".mvol"));
  }
  return "ingested " + std::to_string(inputs.size()) + " volumes into " + out.string();
}

std::string cmd_preview(const RunConfig& cfg, const std::optional<fs::path>& volume) {
  cfg.validate();
  Volume v = [&] {
    if (volume) return read_mvol(*volume);
    PhantomSpec p = cfg.bench.phantom;
    p.seed = derive_seed(cfg.bench.phantom.seed, 0);
    return generate_phantom(p);
  }();
  if (v.domain() != IntensityDomain::Unit) v = normalize_ct(v);
  const fs::path out = prepare_out(cfg);
  const SubVolume whole = extract_subvolume(v, {0, 0, 0}, v.dims(), volume ? volume->string() : "phantom");
  const SchedulerConfig sched = cfg.scheduler();

  std::vector<std::vector<float>> tiles{central_slice(whole)};
  std::string records = "# tile 0: original\n";
  Rng rng(derive_seed(cfg.seed, kPreviewStream));
  TransformSpec drawn = schedule(sched, rng);
  TrainingPair pair = apply_pipeline(whole, drawn);
  tiles.push_back(central_slice(pair.transformed));
  records += "# tile 1: scheme draw (" + outcome_name(outcome_index(pair.record)) + ")\n" +
             serialize_record(pair.record);
  for (int k = 1; k < kOutcomeCount; ++k) {
    TransformSpec spec = outcome_spec(k);
    spec.sampling = sched;
    spec.rng_seed = derive_seed(cfg.seed, kPreviewStream, static_cast<std::uint64_t>(k));
    pair = apply_pipeline(whole, spec);
    tiles.push_back(central_slice(pair.transformed));
    records += "# tile " + std::to_string(k + 1) + ": " + outcome_name(k) + "\n" + serialize_record(pair.record);
  }
  const auto pgm = montage_pgm(tiles, whole.shape.x, whole.shape.y, 7);
  detail::spit(out / "preview.pgm", pgm);
  write_text(out / "preview_records.txt", records);
  return "wrote " + std::to_string(tiles.size()) + " tiles to " + (out / "preview.pgm").string();
}

std::string cmd_pretrain(const RunConfig& cfg) {
  cfg.validate();
  const std::vector<Volume> vols = load_volumes(cfg);
  const fs::path out = prepare_out(cfg);
  const BenchConfig b = cfg.resolved_bench();
  ProxyTrainConfig p = b.proxy;
  p.scheduler = cfg.scheduler();
  const nn::InitScheme init{b.init_kind, derive_seed(p.master_seed, kInitStream)};
  const PretrainResult r = pretrain(vols, b.proxy_sampler, p, b.unet, init);
  write_checkpoint(r.checkpoint, out / "pretrain.ckpt");
  write_text(out / "pretrain_log.csv", r.log.to_csv(false));
  std::ostringstream os;
  os << "best epoch " << r.log.best_epoch() << " val_mse " << fmt_double(r.log.best_metric()) << " (epoch 0 "
     << fmt_double(r.log.rows.front().val_metric) << "); checkpoint " << (out / "pretrain.ckpt").string();
  return os.str();
}

std::string cmd_finetune(const RunConfig& cfg) {
  cfg.validate();
  const BenchConfig b = cfg.resolved_bench();
  ModelInit init;
  init.mode = cfg.init;
  init.kind = b.init_kind;
  if (cfg.init == InitMode::Genesis) {
    if (cfg.checkpoint.empty()) throw ConfigError("target.checkpoint is required for init genesis");
    init.checkpoint = std::make_shared<const Checkpoint>(read_checkpoint(cfg.checkpoint));
  }
  const TaskDataset data = make_synthetic_task(b.task);
  const fs::path out = prepare_out(cfg);
  const FinetuneResult r = finetune(data, b.target, b.unet, init);
  const std::string metric = b.task.kind == TaskKind::Segmentation ? "dice" : "auc";
  save_checkpoint(*r.model,
                  {{"task", to_string(b.task.kind)},
                   {"init", to_string(cfg.init)},
                   {"best_epoch", std::to_string(r.log.best_epoch())},
                   {"best_" + metric, fmt_double(r.log.best_metric())}},
                  out / "finetune.ckpt");
  write_text(out / "finetune_log.csv", r.log.to_csv(false));
  std::string ids;
  for (const auto& id : r.train_ids) ids += id + "\n";
  write_text(out / "finetune_train_ids.txt", ids);
  std::ostringstream os;
  os << to_string(cfg.init) << " " << to_string(b.task.kind) << ": best epoch " << r.log.best_epoch() << " " << metric
     << " " << fmt_double(r.log.best_metric()) << " on " << r.train_ids.size() << " labeled samples";
  return os.str();
}

std::string cmd_ablation(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  TransferBench bench(cfg.resolved_bench());
  const AblationTable t = ablation_matrix(bench, cfg.eval.schemes, cfg.eval.trials, cfg.seed);
  for (Scheme s : cfg.eval.schemes)
    write_text(out / ("pretrain_" + std::string(to_string(s)) + "_log.csv"), bench.pretrained(s).log.to_csv(false));
  write_text(out / "ablation.csv", t.to_csv());
  write_text(out / "ablation_trials.csv", trial_values_csv(t.rows));
  write_text(out / "ablation_tests.csv", t.tests_csv());
  auto meta = statistics_metadata();
  meta.emplace_back("label_fraction", fmt_double(bench.config().target.label_fraction));
  write_text(out / "ablation_meta.txt", kv_lines(meta));
  std::ostringstream os;
  os << "best " << t.top_two.a << " vs " << t.top_two.b << ": p " << fmt_double(t.top_two.test.p) << "; worst "
     << t.bottom_two.b << " vs " << t.bottom_two.a << ": p " << fmt_double(t.bottom_two.test.p);
  return os.str();
}

std::string cmd_sweep(const RunConfig& cfg) {
  cfg.validate();
  const fs::path out = prepare_out(cfg);
  TransferBench bench(cfg.resolved_bench());
  const SweepTable t =
      annotation_sweep(bench, cfg.eval.fractions, cfg.eval.inits, cfg.eval.trials, cfg.seed, cfg.eval.sweep_scheme);
  write_text(out / "sweep.csv", t.to_csv());
  write_text(out / "shortfall.csv", t.shortfall_csv());

  std::ostringstream trials, ids;
  trials << "fraction,init,trial,seed,value,n_train\n";
  ids << "fraction,init,trial,id\n";
  for (const auto& c : t.cells)
    for (std::size_t i = 0; i < c.result.values.size(); ++i) {
      trials << fmt_double(c.fraction) << ',' << to_string(c.init) << ',' << i << ',' << c.result.seeds[i] << ','
             << fmt_double(c.result.values[i]) << ',' << c.train_ids[i].size() << '\n';
      for (const auto& id : c.train_ids[i])
        ids << fmt_double(c.fraction) << ',' << to_string(c.init) << ',' << i << ',' << id << '\n';
    }
  write_text(out / "sweep_trials.csv", trials.str());
  write_text(out / "sweep_ids.csv", ids.str());

  auto meta = statistics_metadata();
  const auto saving = t.savings_fraction();
  meta.emplace_back("scheme", to_string(t.scheme));
  meta.emplace_back("reference_mean", fmt_double(t.reference_mean()));
  meta.emplace_back("savings_fraction", saving ? fmt_double(*saving) : "none");
  write_text(out / "sweep_meta.txt", kv_lines(meta));
  return saving ? "genesis reaches the scratch full-data mean at label fraction " + fmt_double(*saving)
                : std::string("genesis does not reach the scratch full-data mean at any swept fraction");
}

std::string cmd_report(const fs::path& run_dir) {
  std::error_code ec;
  if (!fs::is_directory(run_dir, ec)) throw IoError("not a directory: " + run_dir.string());
  std::vector<std::string> written;

  if (const fs::path p = run_dir / "ablation.csv"; fs::exists(p)) {
    const Table t = read_table(p);
    const auto m = t.column("method", p), y = t.column("mean", p), ci = t.column("ci95", p);
    std::vector<PlotPoint> pts;
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      pts.push_back({t.rows[i][m], static_cast<double>(i), to_double(t.rows[i][y], p), to_double(t.rows[i][ci], p)});
    write_text(run_dir / "plot_ablation.csv", plot_csv(pts));
    written.push_back("plot_ablation.csv");
  }

  if (const fs::path p = run_dir / "sweep.csv"; fs::exists(p)) {
    const Table t = read_table(p);
    const auto f = t.column("fraction", p), init = t.column("init", p), y = t.column("mean", p),
               ci = t.column("ci95", p);
    std::vector<PlotPoint> pts;
    for (const auto& row : t.rows) {
      const bool full = row[f] == "full";
      pts.push_back({full ? row[init] + "_full" : row[init], full ? 1.0 : to_double(row[f], p), to_double(row[y], p),
                     to_double(row[ci], p)});
    }
    write_text(run_dir / "plot_sweep.csv", plot_csv(pts));
    written.push_back("plot_sweep.csv");
  }

  std::vector<fs::path> logs;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 8 && name.ends_with("_log.csv")) logs.push_back(e.path());
  }
  std::sort(logs.begin(), logs.end());
  if (!logs.empty()) {
    std::vector<PlotPoint> pts;
    for (const auto& p : logs) {
      const Table t = read_table(p);
      const auto e = t.column("epoch", p), v = t.column("val_metric", p);
      const std::string series = p.filename().string().substr(0, p.filename().string().size() - 8);
      for (const auto& row : t.rows) pts.push_back({series, to_double(row[e], p), to_double(row[v], p), 0.0});
    }
    write_text(run_dir / "plot_convergence.csv", plot_csv(pts));
    written.push_back("plot_convergence.csv");
  }

  if (written.empty()) throw IoError("no tables or training logs in " + run_dir.string());
  std::string s = "wrote";
  for (const auto& w : written) s += " " + w;
  return s;
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 1;
  if (dynamic_cast<const IoError*>(&e)) return 2;
  return 3;
}

std::string error_line(const std::exception& e) {
  const int code = exit_code(e);
  std::string msg = e.what();
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  const char* kind = code == 1 ? "config" : code == 2 ? "io" : "runtime";
  return std::string("error kind=") + kind + " exit=" + std::to_string(code) + ": " + msg;
}

}  // namespace genesis::cli
