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

// hbo: study driver.
//
//   hbo run       [--config F] [--out D] [--seeds S] [--noise on|off]
//                 [--method M]... [--task T]... [--workers W]
//   hbo episode   [--config F] [--out D] [--theta q1,q2,q3,q4,r] [--task T]
//                 [--seeds S] [--noise on|off]
//   hbo validate  [--out D] [--seeds N] [--workers W] [--quick]
//   hbo aggregate [--out D]
//
// Exit status: 0 success, 1 configuration error, 2 when more than 10% of
// the runs failed (validate: when any criterion failed).

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "acceptance_suite.hpp"
#include "hbo/harness/study.hpp"

namespace {

using hbo::harness::ConfigError;
using hbo::harness::ExperimentConfig;
namespace fs = std::filesystem;

struct CommonFlags {
  std::string config;
  std::string out;
  std::string seeds;
  std::string noise;
  std::vector<std::string> methods;
  std::vector<std::string> tasks;
  int workers = 0;
};

ExperimentConfig load(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : hbo::harness::load_config(f.config);
  if (!f.seeds.empty()) cfg.seeds = hbo::harness::detail::parse_seed_text(f.seeds);
  if (!f.noise.empty()) {
    if (f.noise != "on" && f.noise != "off") throw ConfigError("--noise must be on or off");
    cfg.noise = f.noise == "on";
  }
  if (!f.methods.empty()) {
    cfg.methods.clear();
    for (const auto& m : f.methods) {
      try {
        cfg.methods.push_back(hbo::bo::method_from_string(m));
      } catch (const hbo::InvalidArgument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  if (!f.tasks.empty()) {
    std::vector<hbo::Task> keep;
    for (const auto& t : f.tasks) keep.push_back(cfg.tasks[cfg.task_index(t)]);
    cfg.tasks = keep;
  }
  if (f.workers > 0) cfg.workers = f.workers;
  cfg.output_dir = hbo::harness::resolve_output_dir(f.out, cfg);
  cfg.validate();
  return cfg;
}

int cmd_run(const CommonFlags& f) {
  ExperimentConfig cfg = load(f);
  std::cerr << "study: " << cfg.methods.size() << " methods x " << cfg.tasks.size()
            << " tasks x " << cfg.seeds.size() << " seeds -> " << cfg.output_dir << '\n';
  hbo::harness::StudyResult r = hbo::harness::run_study(cfg, cfg.output_dir, &std::cerr);
  std::cout << r.runs.size() - r.failed << " of " << r.runs.size() << " runs completed; "
            << "manifest " << (fs::path(cfg.output_dir) / "manifest.txt").string() << '\n';
  return r.too_many_failures() ? 2 : 0;
}

int cmd_episode(const CommonFlags& f, const std::string& theta_text) {
  ExperimentConfig cfg = load(f);
  std::vector<std::string> cells = hbo::harness::split(theta_text, ',');
  if (cells.size() != hbo::kParamDim) throw ConfigError("--theta needs 5 comma-separated values");
  hbo::ParamVector::Values v;
  try {
    for (int i = 0; i < hbo::kParamDim; ++i) v[i] = std::stod(cells[static_cast<std::size_t>(i)]);
    hbo::ParamVector theta(v);
    hbo::require_in_box(theta, cfg.ocp.theta_box);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("--theta: ") + e.what());
  }
  const hbo::ParamVector theta(v);
  const hbo::Task& task = cfg.tasks.front();
  const std::uint64_t seed = cfg.seeds.front();
  hbo::Trajectory traj;
  try {
    traj = hbo::run_episode(cfg.effective_plant(), cfg.ocp, theta, cfg.initial_state,
                            cfg.steps, seed);
  } catch (const hbo::EpisodeAborted& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }
  std::ostringstream csv;
  hbo::write_trajectory_csv(csv, traj);
  const fs::path path = fs::path(cfg.output_dir) / ("episode_" + task.label + "_seed" +
                                                    std::to_string(seed) + ".csv");
  hbo::harness::write_file(path, csv.str());
  std::cout << "J=" << hbo::harness::fmt(hbo::closed_loop_cost(traj, task)) << " task="
            << task.label << " seed=" << seed << " trajectory=" << path.string() << '\n';
  return 0;
}

int cmd_validate(const CommonFlags& f, bool quick) {
  hbo::acceptance::SuiteOptions o;
  o.studies = !quick;
  if (!f.seeds.empty()) o.seeds = hbo::harness::detail::parse_seed_text(f.seeds).size();
  if (f.workers > 0) o.workers = f.workers;
  ExperimentConfig defaults;
  o.work_dir = fs::path(hbo::harness::resolve_output_dir(f.out, defaults)) / "validate";
  auto results = hbo::acceptance::run_suite(o, std::cout);
  std::size_t failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - failed << " of " << results.size() << " criteria passed\n";
  return failed > 0 ? 2 : 0;
}

int cmd_aggregate(const CommonFlags& f) {
  ExperimentConfig defaults;
  const fs::path dir = hbo::harness::resolve_output_dir(f.out, defaults);
  hbo::harness::AggregateResult agg;
  try {
    agg = hbo::harness::reaggregate(dir);
  } catch (const hbo::InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  std::cout << agg.groups.size() << " (method, task) groups aggregated under "
            << (dir / "aggregate").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop MPC weight tuning with Bayesian optimization"};
  app.require_subcommand(1);
  CommonFlags flags;
  std::string theta = "1,1,1,1,1";
  bool quick = false;

  auto add_config = [&](CLI::App* c) {
    c->add_option("--config", flags.config, "YAML study configuration");
  };
  auto add_out = [&](CLI::App* c) {
    c->add_option("--out", flags.out, "Output directory (default $HBO_OUTPUT_DIR, then config)");
  };
  auto add_common = [&](CLI::App* c) {
    add_config(c);
    add_out(c);
    c->add_option("--seeds", flags.seeds, "Seeds: count N, range A-B or list a,b,c");
    c->add_option("--noise", flags.noise, "Process noise on|off")->check(CLI::IsMember({"on", "off"}));
    c->add_option("--task", flags.tasks, "Restrict the task stack (repeatable, in order)");
  };

  CLI::App* run = app.add_subcommand("run", "Run the full study");
  add_common(run);
  run->add_option("--method", flags.methods, "blackbox, multitask or hierarchical (repeatable)");
  run->add_option("--workers", flags.workers, "Worker threads")->check(CLI::PositiveNumber);

  CLI::App* episode = app.add_subcommand("episode", "One closed-loop rollout");
  add_common(episode);
  episode->add_option("--theta", theta, "MPC weights q1,q2,q3,q4,r");

  CLI::App* validate = app.add_subcommand("validate", "Run the acceptance suite");
  add_out(validate);
  validate->add_option("--seeds", flags.seeds, "Seeds for the study criteria");
  validate->add_option("--workers", flags.workers, "Worker threads")->check(CLI::PositiveNumber);
  validate->add_flag("--quick", quick, "Skip the study criteria");

  CLI::App* agg = app.add_subcommand("aggregate", "Re-aggregate stored histories");
  add_out(agg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(flags);
    if (*episode) return cmd_episode(flags, theta);
    if (*validate) return cmd_validate(flags, quick);
    if (*agg) return cmd_aggregate(flags);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
