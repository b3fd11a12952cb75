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

#include <stdexcept>

#include "genesis/transforms.hpp"

namespace genesis {

void SchedulerConfig::validate() const {
  for (double p : {p_nonlinear, p_shuffle, p_cutout, p_inner_given_cutout, p_decreasing}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("scheduler probabilities must lie in [0,1]");
  }
  if (lut_resolution < kMinLutResolution)
    throw ConfigError("scheduler lut_resolution must be >= " + std::to_string(kMinLutResolution));
  if (shuffle_n_windows < 0) throw ConfigError("scheduler shuffle_n_windows must be >= 0");
  for (std::size_t a = 0; a < 3; ++a) {
    if (shuffle_max_extent[a] < 1) throw ConfigError("scheduler shuffle_max_extent must be >= 1");
    if (shuffle_max_extent[a] >= receptive_field[a])
      throw ConfigError("scheduler shuffle_max_extent must be smaller than the receptive field " +
                        to_string(receptive_field));
  }
  if (cutout_max_windows < 0 || cutout_max_windows > 10)
    throw ConfigError("scheduler cutout_max_windows must lie in [0,10]");
  if (!(cutout_max_fraction > 0.0 && cutout_max_fraction <= 0.25))
    throw ConfigError("scheduler cutout_max_fraction must lie in (0,0.25]");
  if (cutout_max_retries < 1) throw ConfigError("scheduler cutout_max_retries must be >= 1");
}

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Identity: return "identity";
    case Scheme::NonLinear: return "nl";
    case Scheme::LocalShuffle: return "ls";
    case Scheme::OuterCutout: return "oc";
    case Scheme::InnerCutout: return "ic";
    case Scheme::Combined: return "combined";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : {Scheme::Identity, Scheme::NonLinear, Scheme::LocalShuffle, Scheme::OuterCutout,
                   Scheme::InnerCutout, Scheme::Combined}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown scheme '" + name + "'");
}

SchedulerConfig scheme_config(Scheme s, SchedulerConfig base) {
  const SchedulerConfig defaults;
  base.p_nonlinear = base.p_shuffle = base.p_cutout = 0.0;
  switch (s) {
    case Scheme::Identity: break;
    case Scheme::NonLinear: base.p_nonlinear = 1.0; break;
    case Scheme::LocalShuffle: base.p_shuffle = 1.0; break;
    case Scheme::OuterCutout:
      base.p_cutout = 1.0;
      base.p_inner_given_cutout = 0.0;
      break;
    case Scheme::InnerCutout:
      base.p_cutout = 1.0;
      base.p_inner_given_cutout = 1.0;
      break;
    case Scheme::Combined:
      base.p_nonlinear = defaults.p_nonlinear;
      base.p_shuffle = defaults.p_shuffle;
      base.p_cutout = defaults.p_cutout;
      base.p_inner_given_cutout = defaults.p_inner_given_cutout;
      break;
  }
  return base;
}

namespace {

struct OutcomeFlags {
  bool nl;
  bool ls;
  CutoutMode cut;
};

constexpr OutcomeFlags kOutcomes[kOutcomeCount] = {
    {false, false, CutoutMode::None},  {true, false, CutoutMode::None},   {false, true, CutoutMode::None},
    {false, false, CutoutMode::Outer}, {false, false, CutoutMode::Inner}, {true, true, CutoutMode::None},
    {true, false, CutoutMode::Outer},  {true, false, CutoutMode::Inner},  {false, true, CutoutMode::Outer},
    {false, true, CutoutMode::Inner},  {true, true, CutoutMode::Outer},   {true, true, CutoutMode::Inner},
};

}  // namespace

int outcome_index(const TransformSpec& spec) {
  for (int i = 0; i < kOutcomeCount; ++i) {
    const auto& o = kOutcomes[i];
    if (o.nl == spec.apply_nonlinear && o.ls == spec.apply_shuffle && o.cut == spec.cutout) return i;
  }
  throw std::logic_error("unreachable transform combination");
}

std::string outcome_name(int index) {
  if (index < 0 || index >= kOutcomeCount) throw std::out_of_range("outcome index");
  const auto& o = kOutcomes[index];
  std::string name;
  auto add = [&](const char* part) { name += name.empty() ? part : std::string("+") + part; };
  if (o.nl) add("NL");
  if (o.ls) add("LS");
  if (o.cut == CutoutMode::Outer) add("OC");
  if (o.cut == CutoutMode::Inner) add("IC");
  return name.empty() ? "identity" : name;
}

TransformSpec outcome_spec(int index) {
  if (index < 0 || index >= kOutcomeCount) throw std::out_of_range("outcome index");
  TransformSpec s;
  s.apply_nonlinear = kOutcomes[index].nl;
  s.apply_shuffle = kOutcomes[index].ls;
  s.cutout = kOutcomes[index].cut;
  return s;
}

std::array<double, kOutcomeCount> outcome_probabilities(const SchedulerConfig& cfg) {
  std::array<double, kOutcomeCount> p{};
  for (int i = 0; i < kOutcomeCount; ++i) {
    const auto& o = kOutcomes[i];
    double v = (o.nl ? cfg.p_nonlinear : 1.0 - cfg.p_nonlinear) * (o.ls ? cfg.p_shuffle : 1.0 - cfg.p_shuffle);
    switch (o.cut) {
      case CutoutMode::None: v *= 1.0 - cfg.p_cutout; break;
      case CutoutMode::Inner: v *= cfg.p_cutout * cfg.p_inner_given_cutout; break;
      case CutoutMode::Outer: v *= cfg.p_cutout * (1.0 - cfg.p_inner_given_cutout); break;
    }
    p[i] = v;
  }
  return p;
}

TransformSpec schedule(const SchedulerConfig& cfg, Rng& rng) {
  cfg.validate();
  TransformSpec spec;
  spec.sampling = cfg;
  spec.apply_nonlinear = bernoulli(rng, cfg.p_nonlinear);
  spec.apply_shuffle = bernoulli(rng, cfg.p_shuffle);
  const bool cut = bernoulli(rng, cfg.p_cutout);
  const bool inner = bernoulli(rng, cfg.p_inner_given_cutout);
  spec.cutout = cut ? (inner ? CutoutMode::Inner : CutoutMode::Outer) : CutoutMode::None;
  spec.rng_seed = rng();
  return spec;
}

bool TransformSpec::is_fully_parameterized() const {
  if (apply_nonlinear && !bezier) return false;
  if (apply_shuffle && !shuffle_windows) return false;
  if (cutout != CutoutMode::None && !cutout_params) return false;
  return true;
}

TrainingPair apply_pipeline(const SubVolume& sv, const TransformSpec& spec) {
  if (spec.cutout_params && spec.cutout_params->mode != spec.cutout)
    throw Error("transform record cutout mode disagrees with its parameters");
  if (spec.active_count() > 3) throw std::logic_error("more than three transforms active");

  TrainingPair pair{sv, sv, spec};
  TransformSpec& rec = pair.record;
  SubVolume& x = pair.transformed;

  // One sub-stream per transform, so a partially recorded spec still
  // reproduces the remaining draws.
  if (rec.apply_nonlinear) {
    if (!rec.bezier) {
      Rng rng(derive_seed(rec.rng_seed, 1));
      const auto dir = bernoulli(rng, rec.sampling.p_decreasing) ? BezierDirection::Decreasing
                                                                   : BezierDirection::Increasing;
      const BezierMap map = build_intensity_map(rng, dir, rec.sampling.lut_resolution, rec.sampling.monotone_mode);
      rec.bezier = BezierParams{map.p1(), map.p2(), dir, map.resolution(), map.mode()};
      x = apply_nonlinear(x, map);
    } else {
      x = apply_nonlinear(x, rec.bezier->build());
    }
  }
  if (rec.apply_shuffle) {
    if (!rec.shuffle_windows) {
      Rng rng(derive_seed(rec.rng_seed, 2));
      rec.shuffle_windows = sample_shuffle_windows(x.shape, rec.sampling, rng);
    }
    x = apply_shuffle_windows(x, *rec.shuffle_windows);
  }
  if (rec.cutout != CutoutMode::None) {
    if (!rec.cutout_params) {
      Rng rng(derive_seed(rec.rng_seed, 3));
      const CutoutMask mask = gen_cutout_mask(x.shape, rec.cutout, rec.sampling, rng);
      rec.cutout_params = CutoutParams{mask.mode(), mask.windows(), mask.fill_value(), rec.sampling.cutout_max_fraction};
      x = apply_cutout(x, mask);
    } else {
      const auto& c = *rec.cutout_params;
      x = apply_cutout(x, CutoutMask(c.mode, x.shape, c.windows, c.fill_value, c.max_fraction));
    }
  }
  return pair;
}

}  // namespace genesis
