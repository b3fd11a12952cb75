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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "genesis/common.hpp"

namespace genesis {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Mann-Whitney AUC: (ordered pairs + 0.5 * ties) / (#pos * #neg), computed by
/// ranking in O(n log n). Throws Error unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// 2|A n B| / (|A| + |B|); 1 when both masks are empty.
double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
/// |A n B| / |A u B|; 1 when both masks are empty.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Regularized incomplete beta I_x(a, b), by continued fraction.
double incomplete_beta(double a, double b, double x);
/// CDF of Student's t with `dof` degrees of freedom.
double student_t_cdf(double t, double dof);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double dof = 0.0;
  bool significant = false;
  /// Zero pooled variance with different means: t is infinite, p = 0.
  bool degenerate = false;
};

/// Pooled-variance (Student) two-sided independent two-sample t-test at 0.05.
TTestResult ttest_independent(std::span<const double> a, std::span<const double> b);

inline constexpr double kCiZ = 1.96;

struct TrialResult {
  std::string method;
  std::string task;
  std::string metric;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;

  double mean() const;
  /// Sample standard deviation (n - 1).
  double sd() const;
  /// 1.96 * sd / sqrt(n).
  double ci_half_width() const;

  friend bool operator==(const TrialResult&, const TrialResult&) = default;
};

/// Runs fn(base_seed + i) for i < n, in order. A failing trial is rethrown as
/// Error naming its index.
TrialResult run_trials(const std::function<double(std::uint64_t seed)>& fn, int n, std::uint64_t base_seed,
                       std::string method = {}, std::string task = {}, std::string metric = {});

/// "method,task,metric,n,mean,sd,ci95" header plus one row per result.
std::string trials_csv(const std::vector<TrialResult>& results);

/// Plot data: "series,x,y,ci" rows.
struct PlotPoint {
  std::string series;
  double x = 0.0;
  double y = 0.0;
  double ci = 0.0;
};
std::string plot_csv(const std::vector<PlotPoint>& points);

/// Formats a double with 17 significant digits (round-trip exact, stable).
std::string fmt_double(double v);

}  // namespace genesis
