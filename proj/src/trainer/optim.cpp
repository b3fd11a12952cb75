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
#include <sstream>

#include "genesis/evalstat.hpp"
#include "genesis/trainer.hpp"

namespace genesis {

void sgd_step(nn::ParameterStore<float>& store, double lr) {
  for (const auto& p : store.parameters()) {
    if (!p->requires_grad) continue;
    auto& w = p->value.data;
    const auto& g = p->grad.data;
    for (std::size_t i = 0; i < w.size(); ++i)
      w[i] = static_cast<float>(static_cast<double>(w[i]) - lr * static_cast<double>(g[i]));
  }
}

void adam_step(nn::ParameterStore<float>& store, AdamState& state, const AdamHyper& h) {
  const auto& params = store.parameters();
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p->value.data.size(), 0.0);
      state.v.emplace_back(p->value.data.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam state does not match the parameter registry");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(h.beta1, t);
  const double c2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    if (!p.requires_grad) continue;
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.value.data.size()) throw ShapeError("adam state does not match parameter " + p.name);
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad.data[i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double step = h.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + h.eps);
      p.value.data[i] = static_cast<float>(static_cast<double>(p.value.data[i]) - step);
    }
  }
}

namespace {

bool better(double a, double b, bool higher) { return higher ? a > b : a < b; }

}  // namespace

int TrainLog::best_epoch() const {
  if (rows.empty()) throw Error("empty training log");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (better(rows[i].val_metric, rows[best].val_metric, higher_is_better)) best = i;
  return rows[best].epoch;
}

double TrainLog::best_metric() const {
  const int e = best_epoch();
  for (const auto& r : rows)
    if (r.epoch == e) return r.val_metric;
  return rows.front().val_metric;
}

std::optional<int> TrainLog::epochs_to_reach(double threshold) const {
  for (const auto& r : rows)
    if (higher_is_better ? r.val_metric >= threshold : r.val_metric <= threshold) return r.epoch;
  return std::nullopt;
}

std::string TrainLog::to_csv(bool with_seconds) const {
  std::ostringstream os;
  os << "epoch,train_loss,val_metric,lr" << (with_seconds ? ",seconds\n" : "\n");
  for (const auto& r : rows) {
    os << r.epoch << ',' << fmt_double(r.train_loss) << ',' << fmt_double(r.val_metric) << ',' << fmt_double(r.lr);
    if (with_seconds) os << ',' << fmt_double(r.seconds);
    os << '\n';
  }
  return os.str();
}

TrainLog TrainLog::from_csv(const std::string& text, std::string metric_name, bool higher_is_better) {
  TrainLog log;
  log.metric_name = std::move(metric_name);
  log.higher_is_better = higher_is_better;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw IoError("training log: empty");
  std::size_t columns = 0;
  if (line == "epoch,train_loss,val_metric,lr,seconds") {
    columns = 5;
  } else if (line == "epoch,train_loss,val_metric,lr") {
    columns = 4;
  } else {
    throw IoError("training log: unexpected header");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns)
      throw IoError("training log: expected " + std::to_string(columns) + " columns in '" + line + "'");
    try {
      EpochRecord r;
      r.epoch = std::stoi(cells[0]);
      r.train_loss = std::stod(cells[1]);
      r.val_metric = std::stod(cells[2]);
      r.lr = std::stod(cells[3]);
      r.seconds = columns == 5 ? std::stod(cells[4]) : 0.0;
      log.rows.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError("training log: bad number in '" + line + "'");
    }
  }
  return log;
}

bool TrainLog::same_trajectory(const TrainLog& o) const {
  if (rows.size() != o.rows.size() || metric_name != o.metric_name) return false;
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto &a = rows[i], &b = o.rows[i];
    if (a.epoch != b.epoch || !same(a.train_loss, b.train_loss) || !same(a.val_metric, b.val_metric) ||
        !same(a.lr, b.lr))
      return false;
  }
  return true;
}

void PlateauConfig::validate() const {
  if (!(factor > 0.0 && factor < 1.0)) throw ConfigError("proxy.plateau_factor must be in (0, 1)");
  if (patience < 1) throw ConfigError("proxy.plateau_patience must be >= 1");
  if (!(min_lr > 0.0)) throw ConfigError("proxy.min_lr must be > 0");
}

double reduce_lr_on_plateau(const TrainLog& log, const PlateauConfig& cfg) {
  if (log.rows.empty()) throw Error("reduce_lr_on_plateau: empty log");
  const auto& rows = log.rows;
  std::size_t anchor = 0;
  double best = rows[0].val_metric;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (better(rows[i].val_metric, best, log.higher_is_better)) {
      best = rows[i].val_metric;
      anchor = i;
    }
    if (rows[i].lr != rows[i - 1].lr) anchor = std::max(anchor, i);
  }
  const double lr = rows.back().lr;
  if (rows.size() - 1 - anchor >= static_cast<std::size_t>(cfg.patience)) return std::max(lr * cfg.factor, cfg.min_lr);
  return lr;
}

}  // namespace genesis
