// Copyright 2026 The hbo-tune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Acceptance report: one PASS/FAIL line per criterion.
//
//   acceptance [--quick] [--seeds N] [--budget T] [--work DIR] [--workers W] [--strict]
//
// --quick skips the studies (criteria 5-10). The exit status is 0 once every
// criterion has been evaluated; --strict makes it 1 when any failed.

#include <cstdlib>
#include <iostream>
#include <string>

#include "acceptance_suite.hpp"

int main(int argc, char** argv) {
  hbo::acceptance::SuiteOptions opts;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << a << " needs a value\n";
        std::exit(1);
      }
      return argv[++i];
    };
    if (a == "--quick") {
      opts.studies = false;
    } else if (a == "--strict") {
      strict = true;
    } else if (a == "--seeds") {
      opts.seeds = std::stoul(value());
    } else if (a == "--budget") {
      opts.budget = std::stoi(value());
    } else if (a == "--work") {
      opts.work_dir = value();
    } else if (a == "--workers") {
      opts.workers = std::stoi(value());
    } else {
      std::cerr << "unknown argument " << a << '\n';
      return 1;
    }
  }
  auto results = hbo::acceptance::run_suite(opts, std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - static_cast<std::size_t>(failed) << " of " << results.size()
            << " criteria passed\n";
  return strict && failed > 0 ? 1 : 0;
}
