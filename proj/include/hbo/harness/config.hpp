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

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "hbo/bo/optimizers.hpp"
#include "hbo/closed_loop.hpp"
#include "hbo/core.hpp"
#include "hbo/mpc.hpp"
#include "hbo/plant.hpp"

namespace hbo::harness {

/// Raised for unreadable or inconsistent configuration (CLI exit code 1).
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

inline constexpr const char* kOutputDirEnv = "HBO_OUTPUT_DIR";

struct ExperimentConfig {
  PlantConfig plant;
  OcpConfig ocp;
  std::vector<Task> tasks{Task::task1(), Task::task2()};
  std::vector<bo::Method> methods{bo::Method::kBlackbox, bo::Method::kMultitask,
                                  bo::Method::kHierarchical};
  std::vector<std::uint64_t> seeds;  // default 0..29
  std::size_t steps = 25;            // K
  int budget = 50;                   // T per task
  std::vector<int> task_budgets;     // optional per-task override of T
  bool noise = false;
  double noise_std = 0.01;
  State initial_state = (State() << 0.0, 0.0, 0.2, 0.0).finished();
  std::string output_dir = "results";
  int workers = 1;

  // Optimizer settings shared by all runs.
  bo::Acquisition blackbox_acquisition = bo::Acquisition::kLcb;
  bo::Acquisition multitask_acquisition = bo::Acquisition::kEi;
  bo::Acquisition hierarchical_acquisition = bo::Acquisition::kMeanOnly;
  bo::BetaSchedule beta;
  bo::AcquisitionSettings search;
  int refit_every = 5;
  std::size_t max_condition_rows = 400;
  bool residual_targets = true;

  ExperimentConfig() {
    for (std::uint64_t s = 0; s < 30; ++s) seeds.push_back(s);
  }

  PlantConfig effective_plant() const {
    PlantConfig p = plant;
    p.noise_variance.setConstant(noise ? noise_std * noise_std : 0.0);
    return p;
  }

  int budget_for(std::size_t task_index) const {
    return task_index < task_budgets.size() ? task_budgets[task_index] : budget;
  }

  std::size_t task_index(const std::string& label) const {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      if (tasks[i].label == label) return i;
    }
    throw ConfigError("unknown task '" + label + "'");
  }

  bo::BoConfig bo_config(bo::Method m, std::uint64_t seed) const {
    bo::BoConfig c = bo::BoConfig::for_method(m);
    switch (m) {
      case bo::Method::kBlackbox: c.acquisition = blackbox_acquisition; break;
      case bo::Method::kMultitask: c.acquisition = multitask_acquisition; break;
      case bo::Method::kHierarchical: c.acquisition = hierarchical_acquisition; break;
    }
    c.budget = budget;
    c.task_budgets = task_budgets;
    c.beta = beta;
    c.search = search;
    c.seed = seed;
    c.theta_box = ocp.theta_box;
    c.refit_every = refit_every;
    c.initial_state = initial_state;
    c.episode_steps = steps;
    c.dynamics.max_condition_rows = max_condition_rows;
    c.dynamics.residual_targets = residual_targets;
    c.dynamics.delta = 0.05 / static_cast<double>(steps);
    c.dynamics.noise_variance.head<kStateDim>() = effective_plant().noise_variance;
    return c;
  }

  void validate() const {
    auto check = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError(msg);
    };
    check(!methods.empty(), "config: no methods");
    check(!tasks.empty(), "config: no tasks");
    check(!seeds.empty(), "config: no seeds");
    check(steps >= 1, "config: steps K must be >= 1");
    check(budget >= 1, "config: budget T must be >= 1");
    for (int b : task_budgets) check(b >= 1, "config: task budgets must be >= 1");
    check(workers >= 1, "config: workers must be >= 1");
    check(noise_std >= 0.0, "config: noise_std must be nonnegative");
    check(initial_state.allFinite(), "config: initial state must be finite");
    try {
      effective_plant().validate();
      ocp.validate();
      for (const Task& t : tasks) t.validate();
      for (bo::Method m : methods) bo_config(m, 0).validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      for (std::size_t j = i + 1; j < tasks.size(); ++j) {
        check(tasks[i].label != tasks[j].label, "config: duplicate task label");
      }
    }
  }

  /// Canonical text of every effective setting; hashed into the manifest.
  std::string canonical() const {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    os << "plant " << plant.cart_mass << ' ' << plant.pole_mass << ' '
       << plant.pole_half_length << ' ' << plant.gravity << ' ' << plant.dt << '\n';
    os << "ocp " << ocp.horizon << ' ' << ocp.input_bound << ' '
       << ocp.state_lower.transpose() << ' ' << ocp.state_upper.transpose() << ' '
       << ocp.state_penalty << ' ' << ocp.terminal_weight << ' '
       << ocp.solver.max_iterations << ' ' << ocp.solver.tolerance << ' '
       << ocp.theta_box.lower << ' ' << ocp.theta_box.upper << '\n';
    for (const Task& t : tasks) {
      os << "task " << t.label << ' ' << t.state_weights.transpose() << ' '
         << t.input_weight << '\n';
    }
    os << "methods";
    for (auto m : methods) os << ' ' << bo::to_string(m);
    os << "\nseeds";
    for (auto s : seeds) os << ' ' << s;
    os << "\nsteps " << steps << "\nbudget " << budget << "\ntask_budgets";
    for (int b : task_budgets) os << ' ' << b;
    os << "\nnoise " << noise << ' ' << noise_std << "\nx0 " << initial_state.transpose()
       << "\nacquisition " << bo::to_string(blackbox_acquisition) << ' '
       << bo::to_string(multitask_acquisition) << ' '
       << bo::to_string(hierarchical_acquisition) << "\nbeta "
       << static_cast<int>(beta.kind) << ' ' << beta.constant << ' ' << beta.confidence;
    for (double b : beta.sequence) os << ' ' << b;
    os << "\nsearch " << search.restarts << ' ' << search.local_steps << ' '
       << search.refine_starts << ' ' << search.initial_step << ' ' << search.min_step
       << "\nsurrogate " << refit_every << ' ' << max_condition_rows << ' '
       << residual_targets << '\n';
    return os.str();
  }
};

namespace detail {

template <typename T>
T get(const YAML::Node& node, const char* key, T fallback) {
  if (!node || !node[key]) return fallback;
  try {
    return node[key].as<T>();
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

inline State get_state(const YAML::Node& node, const char* key, State fallback) {
  if (!node || !node[key]) return fallback;
  auto v = get<std::vector<double>>(node, key, {});
  if (v.size() != kStateDim) {
    throw ConfigError(std::string("config: '") + key + "' needs 4 entries");
  }
  return Eigen::Map<const State>(v.data());
}

/// "0-29", "30" (count) or "1,4,7".
inline std::vector<std::uint64_t> parse_seed_text(const std::string& text) {
  std::vector<std::uint64_t> out;
  try {
    if (auto dash = text.find('-'); dash != std::string::npos) {
      std::uint64_t a = std::stoull(text.substr(0, dash));
      std::uint64_t b = std::stoull(text.substr(dash + 1));
      if (b < a) throw ConfigError("seed range '" + text + "' is reversed");
      for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
    } else if (text.find(',') != std::string::npos) {
      std::stringstream ss(text);
      std::string cell;
      while (std::getline(ss, cell, ',')) out.push_back(std::stoull(cell));
    } else {
      std::uint64_t n = std::stoull(text);
      for (std::uint64_t s = 0; s < n; ++s) out.push_back(s);
    }
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse seeds '" + text + "'");
  }
  if (out.empty()) throw ConfigError("seed list '" + text + "' is empty");
  return out;
}

inline Task parse_task(const YAML::Node& n) {
  if (n.IsScalar()) {
    const auto name = n.as<std::string>();
    if (name == "task1") return Task::task1();
    if (name == "task2") return Task::task2();
    throw ConfigError("unknown built-in task '" + name + "'");
  }
  try {
    return Task(get_state(n, "q", State::Ones()), get<double>(n, "r", 1.0),
                get<std::string>(n, "label", "task"));
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace detail

/// Parses a YAML document; absent keys keep their defaults.
inline ExperimentConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: YAML error: ") + e.what());
  }
  using detail::get;
  ExperimentConfig c;
  if (!root || root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("config: top level must be a mapping");

  if (auto s = root["study"]) {
    if (auto seeds = s["seeds"]) {
      if (seeds.IsSequence()) {
        c.seeds = get<std::vector<std::uint64_t>>(s, "seeds", {});
        if (c.seeds.empty()) throw ConfigError("config: seed list is empty");
      } else {
        c.seeds = detail::parse_seed_text(seeds.as<std::string>());
      }
    }
    c.steps = get<std::size_t>(s, "steps", c.steps);
    c.budget = get<int>(s, "budget", c.budget);
    c.task_budgets = get<std::vector<int>>(s, "task_budgets", c.task_budgets);
    const auto noise = get<std::string>(s, "noise", c.noise ? "on" : "off");
    if (noise != "on" && noise != "off") throw ConfigError("config: noise must be on or off");
    c.noise = noise == "on";
    c.noise_std = get<double>(s, "noise_std", c.noise_std);
    c.workers = get<int>(s, "workers", c.workers);
    c.output_dir = get<std::string>(s, "output", c.output_dir);
    c.initial_state = detail::get_state(s, "initial_state", c.initial_state);
    if (s["methods"]) {
      c.methods.clear();
      for (const auto& m : get<std::vector<std::string>>(s, "methods", {})) {
        try {
          c.methods.push_back(bo::method_from_string(m));
        } catch (const InvalidArgument& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      }
    }
    if (auto tasks = s["tasks"]) {
      if (!tasks.IsSequence()) throw ConfigError("config: tasks must be a list");
      c.tasks.clear();
      for (const auto& t : tasks) c.tasks.push_back(detail::parse_task(t));
    }
  }
  if (auto p = root["plant"]) {
    c.plant.cart_mass = get(p, "cart_mass", c.plant.cart_mass);
    c.plant.pole_mass = get(p, "pole_mass", c.plant.pole_mass);
    c.plant.pole_half_length = get(p, "pole_half_length", c.plant.pole_half_length);
    c.plant.gravity = get(p, "gravity", c.plant.gravity);
    c.plant.dt = get(p, "dt", c.plant.dt);
  }
  if (auto o = root["mpc"]) {
    c.ocp.horizon = get(o, "horizon", c.ocp.horizon);
    c.ocp.input_bound = get(o, "input_bound", c.ocp.input_bound);
    c.ocp.state_lower = detail::get_state(o, "state_lower", c.ocp.state_lower);
    c.ocp.state_upper = detail::get_state(o, "state_upper", c.ocp.state_upper);
    c.ocp.state_penalty = get(o, "state_penalty", c.ocp.state_penalty);
    c.ocp.terminal_weight = get(o, "terminal_weight", c.ocp.terminal_weight);
    c.ocp.solver.max_iterations = get(o, "max_iterations", c.ocp.solver.max_iterations);
    c.ocp.solver.tolerance = get(o, "tolerance", c.ocp.solver.tolerance);
    c.ocp.theta_box.lower = get(o, "theta_lower", c.ocp.theta_box.lower);
    c.ocp.theta_box.upper = get(o, "theta_upper", c.ocp.theta_box.upper);
  }
  if (auto b = root["bo"]) {
    auto acq = [&](const char* key, bo::Acquisition fallback) {
      if (!b[key]) return fallback;
      try {
        return bo::acquisition_from_string(b[key].as<std::string>());
      } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    };
    c.blackbox_acquisition = acq("blackbox_acquisition", c.blackbox_acquisition);
    c.multitask_acquisition = acq("multitask_acquisition", c.multitask_acquisition);
    c.hierarchical_acquisition = acq("hierarchical_acquisition", c.hierarchical_acquisition);
    if (auto beta = b["beta"]) {
      if (beta.IsSequence()) {
        c.beta.kind = bo::BetaSchedule::Kind::kSequence;
        c.beta.sequence = get<std::vector<double>>(b, "beta", {});
      } else if (beta.as<std::string>() == "calibrated") {
        c.beta.kind = bo::BetaSchedule::Kind::kCalibrated;
      } else {
        c.beta.kind = bo::BetaSchedule::Kind::kConstant;
        c.beta.constant = get<double>(b, "beta", c.beta.constant);
      }
    }
    c.beta.confidence = get(b, "beta_confidence", c.beta.confidence);
    c.search.restarts = get(b, "probes", c.search.restarts);
    c.search.local_steps = get(b, "local_steps", c.search.local_steps);
    c.search.refine_starts = get(b, "refine_starts", c.search.refine_starts);
    c.refit_every = get(b, "refit_every", c.refit_every);
    c.max_condition_rows = get(b, "max_condition_rows", c.max_condition_rows);
    c.residual_targets = get(b, "residual_targets", c.residual_targets);
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Output directory: explicit value, else $HBO_OUTPUT_DIR, else the config's.
inline std::string resolve_output_dir(const std::string& flag,
                                      const ExperimentConfig& cfg) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output_dir;
}

}  // namespace hbo::harness
