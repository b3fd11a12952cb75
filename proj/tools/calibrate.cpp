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

// Writes the frozen convergence threshold used by the transfer study.
//
//   genesis_calibrate [--out calibration/transfer.txt] [--factor 0.75]
//                     [--first-seed 100] [--study-first-seed 200] [--n 10]

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "genesis/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Calibrate the convergence threshold of the toy transfer study"};
  std::string out = "calibration/transfer.txt";
  double factor = 0.75;
  std::uint64_t first = 100, study_first = 200;
  int n = 10;
  app.add_option("--out", out, "Record to write");
  app.add_option("--factor", factor, "Threshold as a share of the mean best SCRATCH metric");
  app.add_option("--first-seed", first, "First calibration seed");
  app.add_option("--study-first-seed", study_first, "First seed reserved for the study");
  app.add_option("--n", n, "Seeds per block")->check(CLI::Range(1, 1000));
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::uint64_t> cal, study;
    for (int i = 0; i < n; ++i) {
      cal.push_back(first + static_cast<std::uint64_t>(i));
      study.push_back(study_first + static_cast<std::uint64_t>(i));
    }
    genesis::TransferBench bench(genesis::BenchConfig::toy());
    const auto rec = genesis::calibrate_transfer(bench, cal, factor, study);
    std::ofstream f(out);
    f << "# Convergence threshold for the toy transfer study, from SCRATCH runs only.\n"
      << "# Regenerate with genesis_calibrate; the study refuses a record whose bench differs.\n"
      << rec.to_text();
    if (!f) throw genesis::IoError("cannot write " + out);
    std::cout << rec.to_text();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
