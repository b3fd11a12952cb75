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

#include <doctest.h>

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/statistics/univariate_statistics.hpp>
#include <cmath>
#include <set>

#include "genesis/experiments.hpp"

using namespace genesis;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& l) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] == 1 && l[j] == 0) {
        ++pairs;
        num += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return num / static_cast<double>(pairs);
}

// Textbook pooled t with the p-value from boost's Student t distribution.
std::pair<double, double> oracle_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double va = boost::math::statistics::sample_variance(a);
  const double vb = boost::math::statistics::sample_variance(b);
  const double sp2 = ((na - 1) * va + (nb - 1) * vb) / (na + nb - 2);
  const double t = (boost::math::statistics::mean(a) - boost::math::statistics::mean(b)) /
                   std::sqrt(sp2 * (1 / na + 1 / nb));
  const boost::math::students_t dist(na + nb - 2);
  return {t, 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)))};
}

BenchConfig tiny_bench() {
  BenchConfig c = BenchConfig::toy();
  c.corpus_volumes = 3;
  c.proxy_sampler.n_per_volume = 4;
  c.proxy.max_epochs = 1;
  c.proxy.val_fraction = 0.34;
  c.task.n_volumes = 4;
  c.task.sampler.n_per_volume = 6;
  c.target.max_epochs = 2;
  c.target.fc_hidden = {8};
  return c;
}

}  // namespace

TEST_CASE("auc examples") {
  const std::vector<double> s{0.2, 0.8, 0.6};
  const std::vector<int> l{0, 1, 0};
  CHECK(auc(s, l) == 1.0);
  const std::vector<double> flat{0.3, 0.3, 0.3, 0.3};
  const std::vector<int> l4{0, 1, 1, 0};
  CHECK(auc(flat, l4) == 0.5);
  const std::vector<double> inv{0.9, 0.1, 0.2, 0.8};
  CHECK(auc(inv, l4) == 0.0);
  const std::vector<int> one_class{1, 1, 1, 1};
  CHECK_THROWS_AS(auc(flat, one_class), Error);
  const std::vector<int> short_labels{1, 0};
  CHECK_THROWS_AS(auc(flat, short_labels), ShapeError);
}

TEST_CASE("auc matches pair counting and ignores monotone rescaling") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 50));
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_int(rng, 0, 9)) / 10.0;  // plenty of ties
      l[i] = bernoulli(rng, 0.4) ? 1 : 0;
    }
    l[0] = 0;
    l[1] = 1;
    const double a = auc(s, l);
    CHECK(a == brute_auc(s, l));
    std::vector<double> warped(n);
    std::transform(s.begin(), s.end(), warped.begin(), [](double v) { return std::exp(3 * v) - 7; });
    CHECK(auc(warped, l) == a);
  }
}

TEST_CASE("dice and iou") {
  const std::vector<std::uint8_t> a{1, 1, 1, 1, 0, 0, 0, 0}, b{0, 0, 1, 1, 1, 1, 0, 0}, z(8, 0);
  CHECK(dice(a, a) == 1.0);
  CHECK(iou(a, a) == 1.0);
  CHECK(dice(a, b) == 0.5);
  CHECK(iou(a, b) == doctest::Approx(2.0 / 6.0));
  const std::vector<std::uint8_t> c{0, 0, 0, 0, 1, 1, 1, 1};
  CHECK(dice(a, c) == 0.0);
  CHECK(iou(a, c) == 0.0);
  CHECK(dice(z, z) == 1.0);
  CHECK(iou(z, z) == 1.0);
  CHECK_THROWS_AS(dice(a, std::vector<std::uint8_t>(3)), ShapeError);

  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> p(64), q(64);
    const double rate = uniform01(rng);
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] = bernoulli(rng, rate);
      q[i] = bernoulli(rng, rate);
    }
    const double d = dice(p, q);
    CHECK(d == dice(q, p));
    CHECK(iou(p, q) == iou(q, p));
    if (std::count(p.begin(), p.end(), 1) + std::count(q.begin(), q.end(), 1) > 0)
      CHECK(iou(p, q) == doctest::Approx(d / (2 - d)).epsilon(1e-12));
  }
}

TEST_CASE("incomplete beta and t cdf") {
  CHECK(incomplete_beta(1, 1, 0.3) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(incomplete_beta(2, 3, 0.0) == 0.0);
  CHECK(incomplete_beta(2, 3, 1.0) == 1.0);
  CHECK(student_t_cdf(0, 5) == doctest::Approx(0.5).epsilon(1e-15));
  for (double dof : {1.0, 2.5, 4.0, 30.0})
    for (double t : {-6.0, -1.3, 0.4, 2.0, 9.0}) {
      const boost::math::students_t dist(dof);
      CHECK(student_t_cdf(t, dof) == doctest::Approx(boost::math::cdf(dist, t)).epsilon(1e-12));
    }
}

TEST_CASE("t-test") {
  const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  const TTestResult r = ttest_independent(a, b);
  CHECK(r.t == doctest::Approx(-3.0 * std::sqrt(1.5)).epsilon(1e-14));
  CHECK(r.dof == 4.0);
  // Two-sided critical values for 4 dof: 2.776 (0.05) and 3.747 (0.02).
  CHECK(r.p < 0.05);
  CHECK(r.p > 0.02);
  CHECK(r.p == doctest::Approx(0.021311641128756).epsilon(1e-12));
  CHECK(r.significant);

  const TTestResult s = ttest_independent(b, a);
  CHECK(s.t == -r.t);
  CHECK(s.p == r.p);

  const TTestResult same = ttest_independent(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  const std::vector<double> c{2, 2, 2}, d{3, 3, 3};
  CHECK(ttest_independent(c, c).p == 1.0);
  const TTestResult deg = ttest_independent(c, d);
  CHECK(deg.degenerate);
  CHECK(deg.p == 0.0);
  CHECK_THROWS_AS(ttest_independent(std::vector<double>{1}, a), Error);

  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(static_cast<std::size_t>(uniform_int(rng, 2, 12)));
    std::vector<double> y(static_cast<std::size_t>(uniform_int(rng, 2, 12)));
    for (double& v : x) v = uniform01(rng);
    for (double& v : y) v = uniform01(rng) + 0.3;
    const auto [t, p] = oracle_ttest(x, y);
    const TTestResult got = ttest_independent(x, y);
    CHECK(got.t == doctest::Approx(t).epsilon(1e-9));
    CHECK(std::fabs(got.p - p) < 1e-9);
  }
}

TEST_CASE("trial aggregation") {
  const std::vector<double> vals{0.5, 0.7};
  std::size_t k = 0;
  const TrialResult r = run_trials([&](std::uint64_t) { return vals[k++]; }, 2, 10, "m", "t", "dice");
  CHECK(r.mean() == doctest::Approx(0.6));
  CHECK(r.sd() == doctest::Approx(std::sqrt(0.02)));
  CHECK(r.ci_half_width() == doctest::Approx(1.96 * std::sqrt(0.02) / std::sqrt(2.0)));
  CHECK(r.seeds == std::vector<std::uint64_t>{10, 11});

  const TrialResult flat = run_trials([](std::uint64_t) { return 0.25; }, 5, 0);
  CHECK(flat.sd() == 0.0);
  CHECK(flat.ci_half_width() == 0.0);

  auto by_seed = [](std::uint64_t s) { return static_cast<double>(s % 7) / 7.0; };
  CHECK(run_trials(by_seed, 4, 3) == run_trials(by_seed, 4, 3));

  CHECK_THROWS_AS(run_trials(by_seed, 1, 0), ConfigError);
  try {
    run_trials([](std::uint64_t s) -> double {
      if (s == 12) throw Error("boom");
      return 0.0;
    }, 4, 10);
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("trial 2") != std::string::npos);
  }

  const std::string csv = trials_csv({r});
  CHECK(csv.rfind("method,task,metric,n,mean,sd,ci95\nm,t,dice,2,", 0) == 0);
  CHECK(plot_csv({{"s", 0.1, 0.5, 0.01}}) == "series,x,y,ci\ns,0.1,0.5,0.01\n");
}

TEST_CASE("fraction validation") {
  CHECK_NOTHROW(validate_fractions({0.1, 0.2, 0.5, 1.0}));
  CHECK_THROWS_AS(validate_fractions({}), ConfigError);
  CHECK_THROWS_AS(validate_fractions({0.2, 0.1}), ConfigError);
  CHECK_THROWS_AS(validate_fractions({0.1, 0.1}), ConfigError);
  CHECK_THROWS_AS(validate_fractions({0.0, 0.5}), ConfigError);
  CHECK_THROWS_AS(validate_fractions({0.5, 1.5}), ConfigError);
}

TEST_CASE("ablation matrix on a tiny bench") {
  TransferBench bench(tiny_bench());
  CHECK_THROWS_AS(ablation_matrix(bench, {Scheme::Combined}, 2, 0), ConfigError);
  CHECK_THROWS_AS(ablation_matrix(bench, {Scheme::Combined, Scheme::Combined}, 2, 0), ConfigError);

  const AblationTable t = ablation_matrix(bench, all_schemes(), 2, 5);
  REQUIRE(t.rows.size() == 6);
  CHECK(t.task == "segmentation");
  CHECK(t.metric == "dice");
  std::set<std::string> methods;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    methods.insert(t.rows[i].method);
    CHECK(t.rows[i].method == to_string(all_schemes()[i]));
    CHECK(t.rows[i].seeds == std::vector<std::uint64_t>{5, 6});
    for (double v : t.rows[i].values) CHECK((v >= 0.0 && v <= 1.0));
  }
  CHECK(methods.size() == 6);
  double best = -1, worst = 2;
  for (const auto& r : t.rows) {
    best = std::max(best, r.mean());
    worst = std::min(worst, r.mean());
  }
  auto mean_of = [&](const std::string& m) {
    for (const auto& r : t.rows)
      if (r.method == m) return r.mean();
    return std::nan("");
  };
  CHECK(mean_of(t.top_two.a) == best);
  CHECK(mean_of(t.bottom_two.b) == worst);
  CHECK(t.to_csv().find("\ncombined,segmentation,dice,2,") != std::string::npos);
  CHECK(t.tests_csv().rfind("comparison,a,b,t,p,dof,significant,degenerate\ntop_two,", 0) == 0);
  CHECK(t.plot().size() == 6);

  // The identity checkpoint was trained without any transformation.
  const auto& meta = bench.pretrained(Scheme::Identity).checkpoint;
  CHECK(meta.meta("scheduler.p_nonlinear") == "0");
  CHECK(meta.meta("scheduler.p_shuffle") == "0");
  CHECK(meta.meta("scheduler.p_cutout") == "0");

  TransferBench again(tiny_bench());
  const AblationTable u = ablation_matrix(again, all_schemes(), 2, 5);
  CHECK(u.to_csv() == t.to_csv());
  CHECK(u.tests_csv() == t.tests_csv());
  CHECK(trial_values_csv(u.rows) == trial_values_csv(t.rows));
}

TEST_CASE("annotation sweep on a tiny bench") {
  TransferBench bench(tiny_bench());
  const std::vector<double> fractions{0.1, 0.2, 0.5, 1.0};
  const SweepTable s = annotation_sweep(bench, fractions, {InitMode::Scratch, InitMode::Genesis}, 2, 3);
  REQUIRE(s.cells.size() == fractions.size() * 2);
  CHECK(s.reference.size() == 2);

  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t trial = 0; trial < 2; ++trial)
      for (std::size_t f = 1; f < fractions.size(); ++f) {
        const auto& small = s.cell(f - 1, i).train_ids[trial];
        const auto& big = s.cell(f, i).train_ids[trial];
        CHECK(small.size() < big.size());
        const std::set<std::string> big_set(big.begin(), big.end());
        for (const auto& id : small) CHECK(big_set.count(id) == 1);
      }

  // The full-data row equals an independent full-data run with the same seeds.
  TransferBench other(tiny_bench());
  const TrialResult full = run_trials(
      [&](std::uint64_t seed) { return other.run(InitMode::Scratch, Scheme::Combined, seed, 1.0).log.best_metric(); },
      2, 3, "scratch", "segmentation", "dice");
  CHECK(s.cell(3, 0).result == full);
  CHECK(s.reference[0] == full);

  const auto rows = s.shortfall();
  REQUIRE(rows.size() == 8);
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].init == rows[k - 1].init) {
      CHECK(rows[k].fraction > rows[k - 1].fraction);
      CHECK(rows[k].shortfall <= rows[k - 1].shortfall);
    }
  CHECK(s.to_csv().rfind("fraction,init,n,mean,sd,ci95\n0.1,scratch,2,", 0) == 0);
  CHECK(s.to_csv().find("\nfull,genesis,2,") != std::string::npos);
  CHECK(s.shortfall_csv().rfind("fraction,init,mean,envelope,shortfall\n", 0) == 0);

  const auto saving = s.savings_fraction();
  if (saving) {
    const auto it = std::find(fractions.begin(), fractions.end(), *saving);
    REQUIRE(it != fractions.end());
    CHECK(s.cell(static_cast<std::size_t>(it - fractions.begin()), 1).result.mean() >= s.reference[0].mean());
  }

  CHECK_THROWS_AS(annotation_sweep(bench, {0.5, 0.2}, {InitMode::Scratch}, 2, 0), ConfigError);
  CHECK_THROWS_AS(annotation_sweep(bench, {0.5}, {}, 2, 0), ConfigError);
}
