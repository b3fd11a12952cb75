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

// Acceptance runner: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 1 4 7      run a subset

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <set>
#include <string>
#include <vector>

#include "harness.hpp"

namespace {

struct Criterion {
  int id;
  const char* name;
  acceptance::Outcome (*run)();
  /// Wall-clock budget in seconds; 0 means none.
  double budget;
};

const std::vector<Criterion> kCriteria = {
    {1, "transform invariants", acceptance::transform_invariants, 300},
    {2, "scheduler distribution", acceptance::scheduler_distribution, 0},
    {3, "gradient correctness", acceptance::gradient_correctness, 120},
    {4, "metric oracles", acceptance::metric_oracles, 0},
    {5, "proxy training", acceptance::proxy_training, 900},
    {6, "transfer benefit", acceptance::transfer_benefit, 3600},
    {7, "serialization", acceptance::serialization, 0},
    {8, "sweep protocol", acceptance::sweep_protocol, 0},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    acceptance::Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0 && secs >= c.budget) {
      out.pass = false;
      out.detail += " (over the " + std::to_string(static_cast<int>(c.budget)) + " s budget)";
    }
    failures += out.pass ? 0 : 1;
    std::printf("criterion %d %-24s %s  %.1fs  %s\n", c.id, c.name, out.pass ? "PASS" : "FAIL", secs,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
