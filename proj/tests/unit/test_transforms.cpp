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
#include <set>

#include "doctest.h"
#include "genesis/transforms.hpp"

using namespace genesis;

namespace {

SubVolume random_subvolume(Dims3 shape, Rng& rng) {
  SubVolume sv{std::vector<float>(shape.count()), shape, {}, "rand"};
  for (float& v : sv.data) v = static_cast<float>(uniform01(rng));
  return sv;
}

std::vector<float> sorted(std::vector<float> v) {
  std::sort(v.begin(), v.end());
  return v;
}

/// Independent evaluation of the curve as a function of x: bisection on the
/// parameter t, valid when x(t) is strictly increasing.
double bezier_by_bisection(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double v) {
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (bezier_point(p0, p1, p2, p3, mid).x < v) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return bezier_point(p0, p1, p2, p3, 0.5 * (lo + hi)).y;
}

SchedulerConfig small_cfg() {
  SchedulerConfig cfg;
  cfg.shuffle_max_extent = {3, 3, 2};
  cfg.receptive_field = {32, 32, 32};
  cfg.shuffle_n_windows = 200;
  cfg.lut_resolution = 2000;
  return cfg;
}

}  // namespace

TEST_CASE("bezier_point closed forms") {
  const Point2 a{0, 0}, b{1, 1};
  CHECK(bezier_point(a, {0.3, 0.9}, {0.1, 0.2}, b, 0.0) == a);
  CHECK(bezier_point(a, {0.3, 0.9}, {0.1, 0.2}, b, 1.0) == b);
  const Point2 lin = bezier_point(a, a, b, b, 0.5);
  CHECK(lin.x == doctest::Approx(0.5));
  CHECK(lin.y == doctest::Approx(0.5));
  const Point2 sym = bezier_point(a, {0.25, 0.75}, {0.75, 0.25}, b, 0.5);
  CHECK(sym.x == doctest::Approx(0.5));
  CHECK(sym.y == doctest::Approx(0.5));
  CHECK_THROWS(bezier_point(a, a, b, b, 1.01));
  CHECK_THROWS(bezier_point(a, a, b, b, -0.01));
}

TEST_CASE("linear control points give the identity map") {
  const BezierMap map({0, 0}, {1, 1}, BezierDirection::Increasing, 100000);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = uniform01(rng);
    REQUIRE(std::fabs(map(v) - v) < 1e-9);
  }
  CHECK(map(0.0) == 0.0);
  CHECK(map(1.0) == 1.0);
}

TEST_CASE("decreasing maps pin their endpoints") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const BezierMap map = build_intensity_map(rng, BezierDirection::Decreasing, 1000);
    REQUIRE(map(0.0) == doctest::Approx(1.0).epsilon(1e-6));
    REQUIRE(map(1.0) == doctest::Approx(0.0).epsilon(1e-6));
  }
  const Point2 same{0.4, 0.4};
  const BezierMap pinned(same, same, BezierDirection::Decreasing, 5000);
  CHECK(pinned(0.0) == 1.0);
  CHECK(pinned(1.0) == 0.0);
}

TEST_CASE("map outputs stay in the unit interval and the table is sorted") {
  Rng rng(3);
  for (int m = 0; m < 20; ++m) {
    const auto dir = m % 2 ? BezierDirection::Decreasing : BezierDirection::Increasing;
    const BezierMap map = build_intensity_map(rng, dir, 1000);
    CHECK(std::is_sorted(map.lut_x().begin(), map.lut_x().end()));
    for (int i = 0; i < 1000; ++i) {
      const double y = map(uniform01(rng));
      REQUIRE(y >= 0.0);
      REQUIRE(y <= 1.0);
    }
  }
  CHECK_THROWS_AS(build_intensity_map(rng, BezierDirection::Increasing, 999), ConfigError);
}

TEST_CASE("strict mode is monotone even for extreme control points") {
  const BezierMap map({0.95, 0.0}, {0.05, 1.0}, BezierDirection::Increasing, 20000, MonotoneMode::Strict);
  double prev = -1.0;
  for (int i = 0; i <= 1000; ++i) {
    const double y = map(i / 1000.0);
    REQUIRE(y + 1e-12 >= prev);
    prev = y;
  }
}

TEST_CASE("apply_nonlinear") {
  Rng rng(4);
  const SubVolume sv = random_subvolume({8, 8, 4}, rng);
  const BezierMap identity({0, 0}, {1, 1}, BezierDirection::Increasing, 100000);
  const SubVolume same = apply_nonlinear(sv, identity);
  for (std::size_t i = 0; i < sv.size(); ++i) REQUIRE(std::fabs(same.data[i] - sv.data[i]) < 1e-6);

  const BezierMap map = build_intensity_map(rng, BezierDirection::Decreasing, 1000);
  SubVolume dup = sv;
  dup.data[5] = dup.data[17];
  const SubVolume out = apply_nonlinear(dup, map);
  CHECK(out.data[5] == out.data[17]);
  CHECK(out.shape == sv.shape);
}

TEST_CASE("strictly monotone maps preserve the number of distinct levels") {
  // Control points with x(t) strictly increasing; the bisection oracle
  // evaluates the same curve without the lookup table.
  const Point2 p0{0, 0}, p1{0.2, 0.7}, p2{0.6, 0.95}, p3{1, 1};
  const BezierMap map(p1, p2, BezierDirection::Increasing, 100000);
  SubVolume sv{std::vector<float>(64), {4, 4, 4}, {}, ""};
  for (std::size_t i = 0; i < sv.size(); ++i) sv.data[i] = static_cast<float>(i % 16) / 15.0f;
  const SubVolume out = apply_nonlinear(sv, map);
  for (std::size_t i = 0; i < sv.size(); ++i) {
    const double oracle = bezier_by_bisection(p0, p1, p2, p3, sv.data[i]);
    REQUIRE(std::fabs(out.data[i] - oracle) < 1e-6);
  }
  const std::set<float> in_levels(sv.data.begin(), sv.data.end());
  const std::set<float> out_levels(out.data.begin(), out.data.end());
  CHECK(in_levels.size() == 16);
  CHECK(out_levels.size() == in_levels.size());
}

TEST_CASE("shuffle window follows the row/column permutation product") {
  // W = [[1,2],[3,4]] laid out as rows along y, columns along x.
  SubVolume sv{{1, 2, 3, 4}, {2, 2, 1}, {}, ""};
  ShuffleWindow w{{0, 0, 0}, {2, 2, 1}, {std::vector<std::uint32_t>{0, 1}, {1, 0}, {0}}};
  apply_shuffle_window(sv, w);
  CHECK(sv.data == std::vector<float>{3, 4, 1, 2});

  SubVolume cols{{1, 2, 3, 4}, {2, 2, 1}, {}, ""};
  apply_shuffle_window(cols, ShuffleWindow{{0, 0, 0}, {2, 2, 1}, {std::vector<std::uint32_t>{1, 0}, {0, 1}, {0}}});
  CHECK(cols.data == std::vector<float>{2, 1, 4, 3});
}

TEST_CASE("identity permutations leave the volume unchanged") {
  Rng rng(5);
  const SubVolume sv = random_subvolume({8, 8, 8}, rng);
  auto windows = sample_shuffle_windows(sv.shape, small_cfg(), rng);
  for (auto& w : windows) {
    for (auto& p : w.perm) std::iota(p.begin(), p.end(), 0u);
  }
  CHECK(apply_shuffle_windows(sv, windows) == sv);
}

TEST_CASE("shuffle preserves value multisets per window and globally") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const SubVolume sv = random_subvolume({8, 8, 8}, rng);
    const auto windows = sample_shuffle_windows(sv.shape, small_cfg(), rng);
    SubVolume cur = sv;
    for (const auto& w : windows) {
      std::vector<float> before, after;
      for (std::size_t z = 0; z < w.extent.z; ++z)
        for (std::size_t y = 0; y < w.extent.y; ++y)
          for (std::size_t x = 0; x < w.extent.x; ++x)
            before.push_back(cur.at(w.origin.x + x, w.origin.y + y, w.origin.z + z));
      apply_shuffle_window(cur, w);
      for (std::size_t z = 0; z < w.extent.z; ++z)
        for (std::size_t y = 0; y < w.extent.y; ++y)
          for (std::size_t x = 0; x < w.extent.x; ++x)
            after.push_back(cur.at(w.origin.x + x, w.origin.y + y, w.origin.z + z));
      REQUIRE(sorted(before) == sorted(after));
    }
    CHECK(sorted(cur.data) == sorted(sv.data));
  }
}

TEST_CASE("oversize shuffle windows are clipped, never rejected") {
  Rng rng(7);
  const SubVolume sv = random_subvolume({4, 4, 1}, rng);
  ShuffleWindow w{{2, 2, 0}, {4, 4, 3}, {std::vector<std::uint32_t>{3, 1, 0, 2}, {2, 3, 1, 0}, {1, 2, 0}}};
  SubVolume out = sv;
  CHECK_NOTHROW(apply_shuffle_window(out, w));
  CHECK(sorted(out.data) == sorted(sv.data));

  SchedulerConfig cfg = small_cfg();
  const auto windows = sample_shuffle_windows({4, 4, 1}, cfg, rng);
  for (const auto& win : windows) CHECK(win.extent.z == 1);
}

TEST_CASE("local_pixel_shuffle checks the receptive field") {
  Rng rng(8);
  const SubVolume sv = random_subvolume({8, 8, 8}, rng);
  SchedulerConfig cfg = small_cfg();
  cfg.receptive_field = {3, 32, 32};
  CHECK_THROWS_AS(local_pixel_shuffle(sv, cfg, rng), ConfigError);
  cfg.receptive_field = {4, 32, 32};
  const auto [out, windows] = local_pixel_shuffle(sv, cfg, rng);
  CHECK(windows.size() == 200);
  CHECK(sorted(out.data) == sorted(sv.data));
}

TEST_CASE("inner cutout with one small window") {
  const CutoutMask m(CutoutMode::Inner, {64, 64, 32}, {Box{{10, 10, 10}, {4, 4, 4}}}, 0.3f);
  CHECK(m.masked_count() == 64);
  CHECK(m.masked_fraction() == doctest::Approx(64.0 / 131072.0));
  CHECK_THROWS(CutoutMask(CutoutMode::Inner, {8, 8, 8}, {Box{{0, 0, 0}, {8, 8, 4}}}, 0.3f));
  CHECK_THROWS(CutoutMask(CutoutMode::Outer, {8, 8, 8}, {Box{{0, 0, 0}, {4, 4, 4}}}, 0.3f));
}

TEST_CASE("generated masks respect the area cap") {
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const auto mode = i % 2 ? CutoutMode::Inner : CutoutMode::Outer;
    const CutoutMask m = gen_cutout_mask({16, 16, 8}, mode, small_cfg(), rng);
    REQUIRE(m.masked_fraction() <= 0.25);
    REQUIRE(m.fill_value() >= 0.0f);
    REQUIRE(m.fill_value() <= 1.0f);
    REQUIRE(m.mode() == mode);
    REQUIRE(m.windows().size() <= 10);
  }
}

TEST_CASE("zero-window cutouts") {
  SchedulerConfig cfg = small_cfg();
  cfg.cutout_max_windows = 0;
  Rng rng(10);
  const CutoutMask inner = gen_cutout_mask({16, 16, 8}, CutoutMode::Inner, cfg, rng);
  CHECK(inner.masked_count() == 0);
  const CutoutMask outer = gen_cutout_mask({16, 16, 8}, CutoutMode::Outer, cfg, rng);
  CHECK(outer.masked_fraction() <= 0.25);
  CHECK(outer.masked_fraction() > 0.0);
}

TEST_CASE("fallback repairs stay within the cap") {
  SchedulerConfig cfg = small_cfg();
  cfg.cutout_max_retries = 1;
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    REQUIRE(gen_cutout_mask({5, 7, 3}, CutoutMode::Outer, cfg, rng).masked_fraction() <= 0.25);
    REQUIRE(gen_cutout_mask({5, 7, 3}, CutoutMode::Inner, cfg, rng).masked_fraction() <= 0.25);
    REQUIRE(gen_cutout_mask({2, 2, 1}, CutoutMode::Inner, cfg, rng).masked_fraction() <= 0.25);
  }
}

TEST_CASE("apply_cutout") {
  Rng rng(12);
  const SubVolume sv = random_subvolume({6, 6, 6}, rng);
  CHECK(apply_cutout(sv, CutoutMask::from_mask(sv.shape, std::vector<std::uint8_t>(216, 0), 0.7f)) == sv);
  const SubVolume full = apply_cutout(sv, CutoutMask::from_mask(sv.shape, std::vector<std::uint8_t>(216, 1), 0.7f));
  for (float v : full.data) CHECK(v == 0.7f);

  const CutoutMask m = gen_cutout_mask(sv.shape, CutoutMode::Inner, small_cfg(), rng);
  const SubVolume out = apply_cutout(sv, m);
  for (std::size_t i = 0; i < sv.size(); ++i) {
    if (!m.mask()[i]) REQUIRE(out.data[i] == sv.data[i]);
    if (m.mask()[i]) REQUIRE(out.data[i] == m.fill_value());
  }
  CHECK_THROWS_AS(apply_cutout(sv, CutoutMask::from_mask({6, 6, 5}, std::vector<std::uint8_t>(180, 0), 0.f)),
                  ShapeError);
}

TEST_CASE("schedule degenerate configs") {
  Rng rng(13);
  SchedulerConfig cfg = small_cfg();
  cfg.p_nonlinear = cfg.p_shuffle = cfg.p_cutout = 0.0;
  for (int i = 0; i < 1000; ++i) REQUIRE(schedule(cfg, rng).is_identity());
  cfg.p_nonlinear = 1.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = schedule(cfg, rng);
    REQUIRE(s.apply_nonlinear);
    REQUIRE(s.active_count() == 1);
  }
  cfg.p_nonlinear = 2.0;
  CHECK_THROWS_AS(schedule(cfg, rng), ConfigError);
}

TEST_CASE("outcome probabilities") {
  SchedulerConfig cfg;
  cfg.p_nonlinear = cfg.p_shuffle = 0.5;
  cfg.p_cutout = 0.8;
  cfg.p_inner_given_cutout = 0.5;
  const auto p = outcome_probabilities(cfg);
  CHECK(p[0] == doctest::Approx(0.05));
  CHECK(p[11] == doctest::Approx(0.1));
  CHECK(outcome_name(11) == "NL+LS+IC");
  double total = 0.0;
  for (double v : p) total += v;
  CHECK(total == doctest::Approx(1.0));

  std::set<int> seen;
  Rng rng(14);
  for (int i = 0; i < 20000; ++i) seen.insert(outcome_index(schedule(cfg, rng)));
  CHECK(seen.size() == 12);
  for (int i = 0; i < kOutcomeCount; ++i) CHECK(outcome_index(outcome_spec(i)) == i);
}

TEST_CASE("scheme presets") {
  const auto id = scheme_config(Scheme::Identity);
  CHECK(id.p_nonlinear == 0.0);
  CHECK(id.p_shuffle == 0.0);
  CHECK(id.p_cutout == 0.0);
  const auto oc = scheme_config(Scheme::OuterCutout);
  CHECK(outcome_probabilities(oc)[3] == 1.0);
  const auto ic = scheme_config(Scheme::InnerCutout);
  CHECK(outcome_probabilities(ic)[4] == 1.0);
  CHECK(parse_scheme("combined") == Scheme::Combined);
  CHECK_THROWS_AS(parse_scheme("rubik"), ConfigError);
}

TEST_CASE("apply_pipeline identity and replay") {
  Rng rng(15);
  const SubVolume sv = random_subvolume({16, 16, 8}, rng);
  const SubVolume copy = sv;

  TransformSpec id;
  id.sampling = small_cfg();
  const TrainingPair p0 = apply_pipeline(sv, id);
  CHECK(p0.transformed == sv);
  CHECK(p0.original == sv);

  SchedulerConfig cfg = small_cfg();
  cfg.p_nonlinear = cfg.p_shuffle = cfg.p_cutout = 1.0;
  for (int i = 0; i < 20; ++i) {
    const TransformSpec spec = schedule(cfg, rng);
    const TrainingPair a = apply_pipeline(sv, spec);
    REQUIRE(a.record.is_fully_parameterized());
    REQUIRE(apply_pipeline(sv, a.record).transformed == a.transformed);
    REQUIRE(apply_pipeline(sv, spec).transformed == a.transformed);
    REQUIRE(a.original == sv);
  }
  CHECK(sv == copy);
}

TEST_CASE("cutout-only pipeline changes at most a quarter of the voxels") {
  Rng rng(16);
  SchedulerConfig cfg = scheme_config(Scheme::OuterCutout, small_cfg());
  for (int i = 0; i < 200; ++i) {
    const SubVolume sv = random_subvolume({16, 16, 8}, rng);
    const TrainingPair p = apply_pipeline(sv, schedule(cfg, rng));
    std::size_t diff = 0;
    for (std::size_t j = 0; j < sv.size(); ++j) diff += p.transformed.data[j] != sv.data[j];
    REQUIRE(static_cast<double>(diff) / static_cast<double>(sv.size()) <= 0.25);
  }
}

TEST_CASE("pipeline rejects inconsistent cutout records") {
  Rng rng(17);
  const SubVolume sv = random_subvolume({8, 8, 8}, rng);
  TransformSpec spec;
  spec.cutout = CutoutMode::Inner;
  spec.cutout_params = CutoutParams{CutoutMode::Outer, {}, 0.5f, 0.25};
  CHECK_THROWS(apply_pipeline(sv, spec));
}

TEST_CASE("transform records round trip through text") {
  Rng rng(18);
  const SubVolume sv = random_subvolume({8, 8, 4}, rng);
  SchedulerConfig cfg = small_cfg();
  cfg.p_nonlinear = cfg.p_shuffle = 1.0;
  cfg.p_cutout = 0.5;
  cfg.shuffle_n_windows = 5;
  for (int i = 0; i < 30; ++i) {
    const TrainingPair p = apply_pipeline(sv, schedule(cfg, rng));
    const std::string text = serialize_record(p.record);
    const TransformSpec back = parse_record(text);
    REQUIRE(back == p.record);
    REQUIRE(serialize_record(back) == text);
    REQUIRE(apply_pipeline(sv, back).transformed == p.transformed);
  }
  CHECK_THROWS(parse_record("garbage\n"));
  CHECK_THROWS(parse_record("genesis-transform-record 1\nnonsense=1\n"));
}
