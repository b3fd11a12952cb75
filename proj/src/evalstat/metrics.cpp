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
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "genesis/evalstat.hpp"

namespace genesis {

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error("auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks (1-based) for tied groups; the positive rank sum gives U.
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) rank_sum += mid;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double u = rank_sum - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

namespace {

struct Overlap {
  std::size_t a = 0, b = 0, both = 0;
};

Overlap overlap(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw ShapeError("mask sizes differ");
  Overlap o;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    o.a += x;
    o.b += y;
    o.both += x && y;
  }
  return o;
}

}  // namespace

double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const Overlap o = overlap(a, b);
  if (o.a + o.b == 0) return 1.0;
  return 2.0 * static_cast<double>(o.both) / static_cast<double>(o.a + o.b);
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  const Overlap o = overlap(a, b);
  const std::size_t uni = o.a + o.b - o.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(o.both) / static_cast<double>(uni);
}

namespace {

// Modified Lentz evaluation of the continued fraction for I_x(a, b).
double beta_fraction(double a, double b, double x) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 10000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("incomplete_beta: a and b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
  return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
  if (!(dof > 0.0)) throw Error("student_t_cdf: dof must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t > 0 ? 1.0 - tail : tail;
}

namespace {

std::pair<double, double> mean_ss(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, ss};
}

}  // namespace

TTestResult ttest_independent(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw Error("ttest_independent: each sample needs at least 2 values");
  const auto [ma, ssa] = mean_ss(a);
  const auto [mb, ssb] = mean_ss(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  TTestResult r;
  r.dof = na + nb - 2.0;
  const double pooled = (ssa + ssb) / r.dof;
  if (pooled == 0.0) {
    if (ma == mb) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
      r.p = 0.0;
      r.degenerate = true;
      r.significant = true;
    }
    return r;
  }
  r.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  // Two-sided p directly from the incomplete beta avoids 1 - cdf cancellation.
  r.p = r.t == 0.0 ? 1.0 : incomplete_beta(0.5 * r.dof, 0.5, r.dof / (r.dof + r.t * r.t));
  r.significant = r.p < 0.05;
  return r;
}

double TrialResult::mean() const {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  return mean_ss(values).first;
}

double TrialResult::sd() const {
  if (values.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(mean_ss(values).second / static_cast<double>(values.size() - 1));
}

double TrialResult::ci_half_width() const {
  return kCiZ * sd() / std::sqrt(static_cast<double>(values.size()));
}

TrialResult run_trials(const std::function<double(std::uint64_t)>& fn, int n, std::uint64_t base_seed,
                       std::string method, std::string task, std::string metric) {
  if (n < 2) throw ConfigError("run_trials: n must be >= 2");
  TrialResult r{std::move(method), std::move(task), std::move(metric), {}, {}};
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(i);
    try {
      r.values.push_back(fn(seed));
    } catch (const std::exception& e) {
      throw Error("trial " + std::to_string(i) + " (seed " + std::to_string(seed) + ") failed: " + e.what());
    }
    r.seeds.push_back(seed);
  }
  return r;
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string trials_csv(const std::vector<TrialResult>& results) {
  std::ostringstream os;
  os << "method,task,metric,n,mean,sd,ci95\n";
  for (const auto& r : results) {
    os << r.method << ',' << r.task << ',' << r.metric << ',' << r.values.size() << ',' << fmt_double(r.mean())
       << ',' << fmt_double(r.sd()) << ',' << fmt_double(r.ci_half_width()) << '\n';
  }
  return os.str();
}

std::string plot_csv(const std::vector<PlotPoint>& points) {
  std::ostringstream os;
  os << "series,x,y,ci\n";
  for (const auto& p : points)
    os << p.series << ',' << fmt_double(p.x) << ',' << fmt_double(p.y) << ',' << fmt_double(p.ci) << '\n';
  return os.str();
}

}  // namespace genesis
