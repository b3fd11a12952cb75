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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genesis/common.hpp"
#include "genesis/sampler.hpp"

namespace genesis {

// ---------------------------------------------------------------------------
// Non-linear intensity remapping
// ---------------------------------------------------------------------------

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Cubic Bezier curve B(t) evaluated per coordinate. Throws for t outside [0,1].
Point2 bezier_point(Point2 p0, Point2 p1, Point2 p2, Point2 p3, double t);

enum class BezierDirection : std::uint8_t { Increasing, Decreasing };

enum class MonotoneMode : std::uint8_t {
  /// Sample pairs sorted by x; single-valued but not necessarily monotone.
  SortByX,
  /// x and y sorted independently; always monotone in the curve's direction.
  Strict,
};

/// Intensity lookup table built by densely sampling a Bezier curve.
/// P0/P3 are pinned by direction; P1/P2 are the random control points.
class BezierMap {
 public:
  BezierMap(Point2 p1, Point2 p2, BezierDirection direction, std::size_t resolution,
            MonotoneMode mode = MonotoneMode::SortByX);

  Point2 p0() const;
  Point2 p1() const { return p1_; }
  Point2 p2() const { return p2_; }
  Point2 p3() const;
  BezierDirection direction() const { return direction_; }
  MonotoneMode mode() const { return mode_; }
  std::size_t resolution() const { return xs_.size(); }

  std::span<const double> lut_x() const { return xs_; }
  std::span<const double> lut_y() const { return ys_; }

  /// Linear interpolation of the lookup table at v (clamped to [0,1]).
  double operator()(double v) const;

 private:
  Point2 p1_;
  Point2 p2_;
  BezierDirection direction_;
  MonotoneMode mode_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

inline constexpr std::size_t kMinLutResolution = 1000;

/// Samples P1, P2 uniformly in the unit square.
BezierMap build_intensity_map(Rng& rng, BezierDirection direction, std::size_t resolution,
                              MonotoneMode mode = MonotoneMode::SortByX);

SubVolume apply_nonlinear(const SubVolume& sv, const BezierMap& map);

// ---------------------------------------------------------------------------
// Local pixel shuffling
// ---------------------------------------------------------------------------

/// One shuffled window: voxel (i,j,k) of the window receives the value at
/// (perm[0][i], perm[1][j], perm[2][k]) of the window before shuffling.
struct ShuffleWindow {
  Index3 origin;
  Dims3 extent;
  std::array<std::vector<std::uint32_t>, 3> perm;

  friend bool operator==(const ShuffleWindow&, const ShuffleWindow&) = default;
};

/// Applies a single window in place. Windows reaching past the volume are
/// clipped; the permutation is restricted to the clipped range.
void apply_shuffle_window(SubVolume& sv, const ShuffleWindow& w);

/// Applies `windows` in sequence; later windows see earlier results.
SubVolume apply_shuffle_windows(const SubVolume& sv, const std::vector<ShuffleWindow>& windows);

// ---------------------------------------------------------------------------
// Inner / outer cutout
// ---------------------------------------------------------------------------

enum class CutoutMode : std::uint8_t { None, Inner, Outer };

struct Box {
  Index3 origin;
  Dims3 extent;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Voxels flagged true are replaced by fill_value. The masked fraction is
/// checked against the cap at construction.
class CutoutMask {
 public:
  CutoutMask(CutoutMode mode, Dims3 shape, std::vector<Box> windows, float fill_value,
             double max_fraction = 0.25);

  /// Arbitrary mask, bypassing the area cap. For tests and hand-built masks.
  static CutoutMask from_mask(Dims3 shape, std::vector<std::uint8_t> mask, float fill_value);

  CutoutMode mode() const { return mode_; }
  const Dims3& shape() const { return shape_; }
  const std::vector<Box>& windows() const { return windows_; }
  float fill_value() const { return fill_; }
  const std::vector<std::uint8_t>& mask() const { return mask_; }
  std::size_t masked_count() const { return masked_; }
  double masked_fraction() const { return static_cast<double>(masked_) / static_cast<double>(shape_.count()); }

 private:
  CutoutMask() = default;

  CutoutMode mode_ = CutoutMode::None;
  Dims3 shape_;
  std::vector<Box> windows_;
  float fill_ = 0.0f;
  std::vector<std::uint8_t> mask_;
  std::size_t masked_ = 0;
};

SubVolume apply_cutout(const SubVolume& sv, const CutoutMask& mask);

// ---------------------------------------------------------------------------
// Scheduling and the full pipeline
// ---------------------------------------------------------------------------

struct SchedulerConfig {
  double p_nonlinear = 0.9;
  double p_shuffle = 0.5;
  double p_cutout = 0.9;
  double p_inner_given_cutout = 0.5;
  /// Probability that a non-linear map is a decreasing curve.
  double p_decreasing = 0.5;
  MonotoneMode monotone_mode = MonotoneMode::SortByX;
  std::size_t lut_resolution = 100000;

  int shuffle_n_windows = 1000;
  Dims3 shuffle_max_extent{8, 8, 4};
  /// Receptive field of the network being trained; shuffle windows must be
  /// strictly smaller along every axis.
  Dims3 receptive_field{64, 64, 64};

  int cutout_max_windows = 10;
  double cutout_max_fraction = 0.25;
  int cutout_max_retries = 100;

  void validate() const;
  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

/// Named scheme presets used by ablations and the CLI.
enum class Scheme { Identity, NonLinear, LocalShuffle, OuterCutout, InnerCutout, Combined };

const char* to_string(Scheme s);
Scheme parse_scheme(const std::string& name);
/// Returns `base` with probabilities set for the scheme. Singletons set
/// exactly one transform to probability 1.
SchedulerConfig scheme_config(Scheme s, SchedulerConfig base = {});

std::vector<ShuffleWindow> sample_shuffle_windows(Dims3 shape, const SchedulerConfig& cfg, Rng& rng);

/// Shuffles `cfg.shuffle_n_windows` random windows; returns the result and
/// the windows used.
std::pair<SubVolume, std::vector<ShuffleWindow>> local_pixel_shuffle(const SubVolume& sv,
                                                                     const SchedulerConfig& cfg, Rng& rng);

CutoutMask gen_cutout_mask(Dims3 shape, CutoutMode mode, const SchedulerConfig& cfg, Rng& rng);

/// Parameters of one Bezier draw; the lookup table is rebuilt on demand.
struct BezierParams {
  Point2 p1;
  Point2 p2;
  BezierDirection direction = BezierDirection::Increasing;
  std::size_t resolution = 100000;
  MonotoneMode mode = MonotoneMode::SortByX;

  BezierMap build() const { return BezierMap(p1, p2, direction, resolution, mode); }
  friend bool operator==(const BezierParams&, const BezierParams&) = default;
};

struct CutoutParams {
  CutoutMode mode = CutoutMode::None;
  std::vector<Box> windows;
  float fill_value = 0.0f;
  double max_fraction = 0.25;
  friend bool operator==(const CutoutParams&, const CutoutParams&) = default;
};

/// Which transforms are active and, once applied, every sampled parameter.
/// At most three transforms can be active since inner and outer cutout share
/// one enum.
struct TransformSpec {
  bool apply_nonlinear = false;
  bool apply_shuffle = false;
  CutoutMode cutout = CutoutMode::None;
  std::uint64_t rng_seed = 0;
  /// Sampling knobs used when parameters below are not yet populated.
  SchedulerConfig sampling;

  std::optional<BezierParams> bezier;
  std::optional<std::vector<ShuffleWindow>> shuffle_windows;
  std::optional<CutoutParams> cutout_params;

  bool is_identity() const { return !apply_nonlinear && !apply_shuffle && cutout == CutoutMode::None; }
  int active_count() const {
    return int(apply_nonlinear) + int(apply_shuffle) + int(cutout != CutoutMode::None);
  }
  /// True when every active transform has its parameters recorded.
  bool is_fully_parameterized() const;

  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

/// The twelve reachable outcomes, in canonical order:
/// identity, NL, LS, OC, IC, NL+LS, NL+OC, NL+IC, LS+OC, LS+IC, NL+LS+OC, NL+LS+IC.
inline constexpr int kOutcomeCount = 12;
int outcome_index(const TransformSpec& spec);
std::string outcome_name(int index);
/// Activation flags of canonical outcome `index` (parameters unpopulated).
TransformSpec outcome_spec(int index);
/// Analytic probability of each outcome under `cfg`.
std::array<double, kOutcomeCount> outcome_probabilities(const SchedulerConfig& cfg);

TransformSpec schedule(const SchedulerConfig& cfg, Rng& rng);

struct TrainingPair {
  SubVolume transformed;
  SubVolume original;
  TransformSpec record;
};

/// Applies the active transforms in the fixed order non-linear -> shuffle ->
/// cutout. Missing parameters are sampled from a stream seeded by
/// spec.rng_seed; recorded ones are reused, so passing the returned record
/// back in reproduces the output bit-exactly.
TrainingPair apply_pipeline(const SubVolume& sv, const TransformSpec& spec);

/// Line-oriented key=value text form of a record.
std::string serialize_record(const TransformSpec& spec);
TransformSpec parse_record(const std::string& text);

}  // namespace genesis
