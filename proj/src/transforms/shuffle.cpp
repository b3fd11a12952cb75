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

#include "genesis/transforms.hpp"

namespace genesis {

namespace {

/// Restricts a permutation of [0, n) to [0, m) by keeping the entries < m in
/// their original order, which is again a bijection.
std::vector<std::uint32_t> restrict_perm(const std::vector<std::uint32_t>& perm, std::size_t m) {
  std::vector<std::uint32_t> out;
  out.reserve(m);
  for (std::uint32_t p : perm) {
    if (p < m) out.push_back(p);
  }
  return out;
}

bool is_permutation_of_range(const std::vector<std::uint32_t>& perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::uint32_t p : perm) {
    if (p >= n || seen[p]) return false;
    seen[p] = true;
  }
  return true;
}

}  // namespace

void apply_shuffle_window(SubVolume& sv, const ShuffleWindow& w) {
  std::array<std::vector<std::uint32_t>, 3> perm;
  Dims3 ext;
  for (std::size_t a = 0; a < 3; ++a) {
    if (w.origin[a] >= sv.shape[a]) return;  // entirely outside: nothing to shuffle
    ext[a] = std::min(w.extent[a], sv.shape[a] - w.origin[a]);
    if (!is_permutation_of_range(w.perm[a], w.extent[a]))
      throw Error("shuffle window permutation is not a bijection on its axis");
    perm[a] = ext[a] == w.extent[a] ? w.perm[a] : restrict_perm(w.perm[a], ext[a]);
  }
  if (ext.count() == 0) return;

  std::vector<float> tmp(ext.count());
  for (std::size_t k = 0; k < ext.z; ++k)
    for (std::size_t j = 0; j < ext.y; ++j)
      for (std::size_t i = 0; i < ext.x; ++i)
        tmp[ext.offset(i, j, k)] = sv.at(w.origin.x + i, w.origin.y + j, w.origin.z + k);

  for (std::size_t k = 0; k < ext.z; ++k)
    for (std::size_t j = 0; j < ext.y; ++j)
      for (std::size_t i = 0; i < ext.x; ++i)
        sv.at(w.origin.x + i, w.origin.y + j, w.origin.z + k) = tmp[ext.offset(perm[0][i], perm[1][j], perm[2][k])];
}

SubVolume apply_shuffle_windows(const SubVolume& sv, const std::vector<ShuffleWindow>& windows) {
  SubVolume out = sv;
  for (const auto& w : windows) apply_shuffle_window(out, w);
  return out;
}

std::vector<ShuffleWindow> sample_shuffle_windows(Dims3 shape, const SchedulerConfig& cfg, Rng& rng) {
  std::vector<ShuffleWindow> windows(static_cast<std::size_t>(std::max(0, cfg.shuffle_n_windows)));
  for (auto& w : windows) {
    for (std::size_t a = 0; a < 3; ++a) {
      const auto want = static_cast<std::size_t>(uniform_int(rng, 1, static_cast<std::int64_t>(cfg.shuffle_max_extent[a])));
      w.extent[a] = std::min(want, shape[a]);
      w.origin[a] = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(shape[a] - w.extent[a])));
    }
    for (std::size_t a = 0; a < 3; ++a) {
      w.perm[a].resize(w.extent[a]);
      std::iota(w.perm[a].begin(), w.perm[a].end(), 0u);
      std::shuffle(w.perm[a].begin(), w.perm[a].end(), rng);
    }
  }
  return windows;
}

std::pair<SubVolume, std::vector<ShuffleWindow>> local_pixel_shuffle(const SubVolume& sv, const SchedulerConfig& cfg,
                                                                     Rng& rng) {
  cfg.validate();
  auto windows = sample_shuffle_windows(sv.shape, cfg, rng);
  SubVolume out = apply_shuffle_windows(sv, windows);
  return {std::move(out), std::move(windows)};
}

}  // namespace genesis
