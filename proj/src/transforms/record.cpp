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
#include <map>
#include <sstream>

#include "genesis/transforms.hpp"

namespace genesis {

namespace {

constexpr const char* kHeader = "genesis-transform-record 1";

template <typename T>
std::string num(T v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_num(std::string_view s, const std::string& key) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error("transform record: bad number '" + std::string(s) + "' for " + key);
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string dims_str(const Dims3& d) { return num(d.x) + "," + num(d.y) + "," + num(d.z); }

Dims3 parse_dims(std::string_view s, const std::string& key) {
  const auto parts = split(s, ',');
  if (parts.size() != 3) throw Error("transform record: expected 3 integers for " + key);
  return {parse_num<std::size_t>(parts[0], key), parse_num<std::size_t>(parts[1], key),
          parse_num<std::size_t>(parts[2], key)};
}

const char* cutout_str(CutoutMode m) {
  return m == CutoutMode::Inner ? "inner" : (m == CutoutMode::Outer ? "outer" : "none");
}

CutoutMode parse_cutout(std::string_view s) {
  if (s == "inner") return CutoutMode::Inner;
  if (s == "outer") return CutoutMode::Outer;
  if (s == "none") return CutoutMode::None;
  throw Error("transform record: bad cutout mode '" + std::string(s) + "'");
}

const char* mode_str(MonotoneMode m) { return m == MonotoneMode::Strict ? "strict" : "sort_x"; }

MonotoneMode parse_mode(std::string_view s) {
  if (s == "strict") return MonotoneMode::Strict;
  if (s == "sort_x") return MonotoneMode::SortByX;
  throw Error("transform record: bad monotone mode '" + std::string(s) + "'");
}

std::string perm_str(const std::vector<std::uint32_t>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + num(p[i]);
  return s;
}

}  // namespace

std::string serialize_record(const TransformSpec& spec) {
  std::ostringstream out;
  const SchedulerConfig& c = spec.sampling;
  out << kHeader << '\n';
  out << "order=nonlinear,shuffle,cutout\n";
  out << "outcome=" << outcome_name(outcome_index(spec)) << '\n';
  out << "nonlinear=" << int(spec.apply_nonlinear) << '\n';
  out << "shuffle=" << int(spec.apply_shuffle) << '\n';
  out << "cutout=" << cutout_str(spec.cutout) << '\n';
  out << "rng_seed=" << spec.rng_seed << '\n';
  out << "sampling.p_nonlinear=" << num(c.p_nonlinear) << '\n';
  out << "sampling.p_shuffle=" << num(c.p_shuffle) << '\n';
  out << "sampling.p_cutout=" << num(c.p_cutout) << '\n';
  out << "sampling.p_inner_given_cutout=" << num(c.p_inner_given_cutout) << '\n';
  out << "sampling.p_decreasing=" << num(c.p_decreasing) << '\n';
  out << "sampling.monotone_mode=" << mode_str(c.monotone_mode) << '\n';
  out << "sampling.lut_resolution=" << c.lut_resolution << '\n';
  out << "sampling.shuffle_n_windows=" << c.shuffle_n_windows << '\n';
  out << "sampling.shuffle_max_extent=" << dims_str(c.shuffle_max_extent) << '\n';
  out << "sampling.receptive_field=" << dims_str(c.receptive_field) << '\n';
  out << "sampling.cutout_max_windows=" << c.cutout_max_windows << '\n';
  out << "sampling.cutout_max_fraction=" << num(c.cutout_max_fraction) << '\n';
  out << "sampling.cutout_max_retries=" << c.cutout_max_retries << '\n';
  if (spec.bezier) {
    const auto& b = *spec.bezier;
    out << "bezier.direction=" << (b.direction == BezierDirection::Increasing ? "increasing" : "decreasing") << '\n';
    out << "bezier.p1=" << num(b.p1.x) << ',' << num(b.p1.y) << '\n';
    out << "bezier.p2=" << num(b.p2.x) << ',' << num(b.p2.y) << '\n';
    out << "bezier.resolution=" << b.resolution << '\n';
    out << "bezier.mode=" << mode_str(b.mode) << '\n';
  }
  if (spec.shuffle_windows) {
    out << "shuffle.windows=" << spec.shuffle_windows->size() << '\n';
    for (const auto& w : *spec.shuffle_windows) {
      out << "shuffle.window=" << dims_str(w.origin) << ' ' << dims_str(w.extent) << ' ' << perm_str(w.perm[0]) << ' '
          << perm_str(w.perm[1]) << ' ' << perm_str(w.perm[2]) << '\n';
    }
  }
  if (spec.cutout_params) {
    const auto& cp = *spec.cutout_params;
    out << "cutout.mode=" << cutout_str(cp.mode) << '\n';
    out << "cutout.fill=" << num(cp.fill_value) << '\n';
    out << "cutout.max_fraction=" << num(cp.max_fraction) << '\n';
    out << "cutout.windows=" << cp.windows.size() << '\n';
    for (const auto& b : cp.windows) out << "cutout.window=" << dims_str(b.origin) << ' ' << dims_str(b.extent) << '\n';
  }
  return out.str();
}

TransformSpec parse_record(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw Error("transform record: missing header");

  TransformSpec spec;
  SchedulerConfig& c = spec.sampling;
  std::size_t expect_windows = 0, expect_boxes = 0;
  bool have_bezier = false;
  BezierParams bz;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("transform record: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string_view val = std::string_view(line).substr(eq + 1);

    if (key == "order" || key == "outcome") {
      continue;
    } else if (key == "nonlinear") {
      spec.apply_nonlinear = parse_num<int>(val, key) != 0;
    } else if (key == "shuffle") {
      spec.apply_shuffle = parse_num<int>(val, key) != 0;
    } else if (key == "cutout") {
      spec.cutout = parse_cutout(val);
    } else if (key == "rng_seed") {
      spec.rng_seed = parse_num<std::uint64_t>(val, key);
    } else if (key == "sampling.p_nonlinear") {
      c.p_nonlinear = parse_num<double>(val, key);
    } else if (key == "sampling.p_shuffle") {
      c.p_shuffle = parse_num<double>(val, key);
    } else if (key == "sampling.p_cutout") {
      c.p_cutout = parse_num<double>(val, key);
    } else if (key == "sampling.p_inner_given_cutout") {
      c.p_inner_given_cutout = parse_num<double>(val, key);
    } else if (key == "sampling.p_decreasing") {
      c.p_decreasing = parse_num<double>(val, key);
    } else if (key == "sampling.monotone_mode") {
      c.monotone_mode = parse_mode(val);
    } else if (key == "sampling.lut_resolution") {
      c.lut_resolution = parse_num<std::size_t>(val, key);
    } else if (key == "sampling.shuffle_n_windows") {
      c.shuffle_n_windows = parse_num<int>(val, key);
    } else if (key == "sampling.shuffle_max_extent") {
      c.shuffle_max_extent = parse_dims(val, key);
    } else if (key == "sampling.receptive_field") {
      c.receptive_field = parse_dims(val, key);
    } else if (key == "sampling.cutout_max_windows") {
      c.cutout_max_windows = parse_num<int>(val, key);
    } else if (key == "sampling.cutout_max_fraction") {
      c.cutout_max_fraction = parse_num<double>(val, key);
    } else if (key == "sampling.cutout_max_retries") {
      c.cutout_max_retries = parse_num<int>(val, key);
    } else if (key == "bezier.direction") {
      have_bezier = true;
      if (val == "increasing") {
        bz.direction = BezierDirection::Increasing;
      } else if (val == "decreasing") {
        bz.direction = BezierDirection::Decreasing;
      } else {
        throw Error("transform record: bad bezier direction");
      }
    } else if (key == "bezier.p1" || key == "bezier.p2") {
      const auto parts = split(val, ',');
      if (parts.size() != 2) throw Error("transform record: expected x,y for " + key);
      Point2& p = key == "bezier.p1" ? bz.p1 : bz.p2;
      p = {parse_num<double>(parts[0], key), parse_num<double>(parts[1], key)};
      have_bezier = true;
    } else if (key == "bezier.resolution") {
      bz.resolution = parse_num<std::size_t>(val, key);
    } else if (key == "bezier.mode") {
      bz.mode = parse_mode(val);
    } else if (key == "shuffle.windows") {
      expect_windows = parse_num<std::size_t>(val, key);
      spec.shuffle_windows.emplace();
      spec.shuffle_windows->reserve(expect_windows);
    } else if (key == "shuffle.window") {
      if (!spec.shuffle_windows) throw Error("transform record: shuffle.window before shuffle.windows");
      const auto parts = split(val, ' ');
      if (parts.size() != 5) throw Error("transform record: malformed shuffle window");
      ShuffleWindow w;
      w.origin = parse_dims(parts[0], key);
      w.extent = parse_dims(parts[1], key);
      for (std::size_t a = 0; a < 3; ++a) {
        for (auto p : split(parts[2 + a], ',')) w.perm[a].push_back(parse_num<std::uint32_t>(p, key));
      }
      spec.shuffle_windows->push_back(std::move(w));
    } else if (key == "cutout.mode") {
      spec.cutout_params.emplace();
      spec.cutout_params->mode = parse_cutout(val);
    } else if (key == "cutout.fill" || key == "cutout.max_fraction" || key == "cutout.windows" ||
               key == "cutout.window") {
      if (!spec.cutout_params) throw Error("transform record: " + key + " before cutout.mode");
      auto& cp = *spec.cutout_params;
      if (key == "cutout.fill") {
        cp.fill_value = parse_num<float>(val, key);
      } else if (key == "cutout.max_fraction") {
        cp.max_fraction = parse_num<double>(val, key);
      } else if (key == "cutout.windows") {
        expect_boxes = parse_num<std::size_t>(val, key);
      } else {
        const auto parts = split(val, ' ');
        if (parts.size() != 2) throw Error("transform record: malformed cutout window");
        cp.windows.push_back(Box{parse_dims(parts[0], key), parse_dims(parts[1], key)});
      }
    } else {
      throw Error("transform record: unknown key '" + key + "'");
    }
  }
  if (have_bezier) spec.bezier = bz;
  if (spec.shuffle_windows && spec.shuffle_windows->size() != expect_windows)
    throw Error("transform record: shuffle window count mismatch");
  if (spec.cutout_params && spec.cutout_params->windows.size() != expect_boxes)
    throw Error("transform record: cutout window count mismatch");
  return spec;
}

}  // namespace genesis
