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

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hbo/bo/optimizers.hpp"
#include "hbo/harness/aggregate.hpp"
#include "hbo/harness/config.hpp"
#include "hbo/harness/io.hpp"

#ifndef HBO_VERSION
#define HBO_VERSION "dev"
#endif

namespace hbo::harness {

/// One optimizer run: a method on the whole task stack for one seed.
struct RunUnit {
  bo::Method method = bo::Method::kBlackbox;
  std::uint64_t seed = 0;
};

struct RunOutcome {
  RunUnit unit;
  std::vector<bo::BoHistory> histories;  // one per task, in stack order
  std::size_t transitions = 0;           // hierarchical only
  std::string model;                     // final dynamics GP, hierarchical only
  std::string error;                     // empty on success
  bool failed() const { return !error.empty(); }
};

inline RunOutcome execute_run(const ExperimentConfig& cfg, const RunUnit& unit) {
  RunOutcome out;
  out.unit = unit;
  bo::BoConfig bc = cfg.bo_config(unit.method, unit.seed);
  bo::EpisodeRunner runner =
      bo::plant_runner(cfg.effective_plant(), cfg.ocp, cfg.initial_state, cfg.steps);
  try {
    switch (unit.method) {
      case bo::Method::kBlackbox:
        for (std::size_t i = 0; i < cfg.tasks.size(); ++i) {
          out.histories.push_back(bo::run_blackbox(bc, cfg.tasks[i], i, runner));
        }
        break;
      case bo::Method::kMultitask:
        out.histories = bo::run_multitask(bc, cfg.tasks, runner);
        break;
      case bo::Method::kHierarchical: {
        bo::HierarchicalResult r = bo::run_hierarchical(bc, cfg.tasks, runner);
        out.histories = std::move(r.histories);
        out.transitions = r.transitions.size();
        out.model = dynamics_model_text(r.model);
        break;
      }
    }
  } catch (const std::exception& e) {
    out.histories.clear();
    out.error = e.what();
  }
  return out;
}

/// Runs units on `workers` threads; results come back in unit order.
inline std::vector<RunOutcome> execute_all(const ExperimentConfig& cfg,
                                           const std::vector<RunUnit>& units,
                                           int workers, std::ostream* log = nullptr) {
  std::vector<RunOutcome> results(units.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < units.size(); i = next++) {
      results[i] = execute_run(cfg, units[i]);
      if (log) {
        std::lock_guard<std::mutex> lock(log_mutex);
        *log << bo::to_string(units[i].method) << " seed " << units[i].seed
             << (results[i].failed() ? " FAILED: " + results[i].error : " done") << '\n'
             << std::flush;
      }
    }
  };
  const int n = std::max(1, std::min<int>(workers, static_cast<int>(units.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

/// Digest of the episode seeds a history consumed; equal across methods at
/// the same (task, seed) when the noise streams are paired.
inline std::string noise_stream_digest(const bo::BoHistory& h) {
  std::ostringstream os;
  for (const auto& r : h.records) os << r.seed << ';';
  return sha256_hex(os.str()).substr(0, 16);
}

struct StudyResult {
  std::vector<RunOutcome> runs;
  AggregateResult aggregate;
  Manifest manifest;
  std::size_t failed = 0;

  double failure_fraction() const {
    return runs.empty() ? 0.0 : static_cast<double>(failed) / static_cast<double>(runs.size());
  }
  bool too_many_failures() const { return failure_fraction() > 0.10; }

  std::vector<bo::BoHistory> histories() const {
    std::vector<bo::BoHistory> all;
    for (const auto& r : runs) all.insert(all.end(), r.histories.begin(), r.histories.end());
    return all;
  }
};

/// Aggregate CSVs, plot data and the file checksums of `dir` in the manifest.
inline AggregateResult finalize_outputs(const std::vector<bo::BoHistory>& histories,
                                        const fs::path& dir, Manifest& manifest) {
  AggregateResult agg = aggregate(histories);
  std::vector<std::string> files = write_aggregate(agg, dir);
  for (PlotKind k : {PlotKind::kBestCost, PlotKind::kCost, PlotKind::kCumulative}) {
    auto more = emit_plot_data(agg, k, dir);
    files.insert(files.end(), more.begin(), more.end());
  }
  for (const auto& rel : files) manifest.set("file." + rel, sha256_hex(read_file(dir / rel)));
  return agg;
}

inline std::vector<RunUnit> study_units(const ExperimentConfig& cfg) {
  std::vector<RunUnit> units;
  for (bo::Method m : cfg.methods) {
    for (std::uint64_t s : cfg.seeds) units.push_back({m, s});
  }
  return units;
}

/// Runs every (method, seed) unit over the task stack and writes
///   histories/<method>_<task>_seed<S>.csv, bounds/... (hierarchical),
///   models/hierarchical.seed<S>.gp, aggregate/*.csv, plots/*.dat and
///   manifest.txt
/// under `dir`. Failed runs are recorded in the manifest and skipped.
inline StudyResult run_study(const ExperimentConfig& cfg, const fs::path& dir,
                             std::ostream* log = nullptr) {
  cfg.validate();
  fs::create_directories(dir);
  StudyResult res;
  res.runs = execute_all(cfg, study_units(cfg), cfg.workers, log);

  Manifest& m = res.manifest;
  m.set("version", HBO_VERSION);
  m.set("config_sha256", sha256_hex(cfg.canonical()));
  for (const auto& run : res.runs) {
    const std::string id = bo::to_string(run.unit.method) + ".seed" + std::to_string(run.unit.seed);
    if (run.failed()) {
      ++res.failed;
      m.set("failure." + id, run.error);
      continue;
    }
    for (const auto& h : run.histories) {
      const std::string stem = run_stem(h.method, h.task, h.seed);
      const std::string rel = "histories/" + stem + ".csv";
      write_file(dir / rel, history_csv(h));
      m.set("file." + rel, sha256_hex(read_file(dir / rel)));
      if (h.method == bo::Method::kHierarchical) {
        const std::string brel = "bounds/" + stem + ".csv";
        write_file(dir / brel, bounds_csv(h));
        m.set("file." + brel, sha256_hex(read_file(dir / brel)));
      }
      m.set("noise." + h.task + ".seed" + std::to_string(h.seed) + "." + bo::to_string(h.method),
            noise_stream_digest(h));
    }
    if (run.unit.method == bo::Method::kHierarchical) {
      m.set("transitions." + id, std::to_string(run.transitions));
      const std::string mrel = "models/" + id + ".gp";
      write_file(dir / mrel, run.model);
      m.set("file." + mrel, sha256_hex(run.model));
    }
  }
  m.set("runs_total", std::to_string(res.runs.size()));
  m.set("runs_failed", std::to_string(res.failed));
  auto all = res.histories();
  if (!all.empty()) res.aggregate = finalize_outputs(all, dir, m);
  write_file(dir / "manifest.txt", m.text());
  return res;
}

/// Reads every history CSV under dir/histories.
inline std::vector<bo::BoHistory> read_histories(const fs::path& dir) {
  const fs::path hdir = dir / "histories";
  if (!fs::is_directory(hdir)) throw InvalidArgument("no histories under '" + dir.string() + "'");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(hdir)) {
    if (e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<bo::BoHistory> out;
  for (const auto& f : files) {
    std::istringstream in(read_file(f));
    out.push_back(parse_history_csv(in));
  }
  if (out.empty()) throw InvalidArgument("no history files under '" + hdir.string() + "'");
  return out;
}

/// Recomputes aggregates and plot data from stored histories, updating the
/// manifest in place.
inline AggregateResult reaggregate(const fs::path& dir) {
  auto histories = read_histories(dir);
  Manifest m;
  if (fs::exists(dir / "manifest.txt")) m = Manifest::parse(read_file(dir / "manifest.txt"));
  AggregateResult agg = finalize_outputs(histories, dir, m);
  write_file(dir / "manifest.txt", m.text());
  return agg;
}

}  // namespace hbo::harness
