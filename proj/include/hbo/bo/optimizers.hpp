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

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hbo/bo/acquisition.hpp"
#include "hbo/bo/multitask.hpp"
#include "hbo/closed_loop.hpp"
#include "hbo/core.hpp"
#include "hbo/gp/calibration.hpp"
#include "hbo/gp/multi_output.hpp"
#include "hbo/mpc.hpp"
#include "hbo/plant.hpp"
#include "hbo/random.hpp"
#include "hbo/surrogate.hpp"

namespace hbo::bo {

enum class Method { kBlackbox, kMultitask, kHierarchical };
enum class Acquisition { kLcb, kEi, kMeanOnly, kTheoryLcb };

inline std::string to_string(Method m) {
  switch (m) {
    case Method::kBlackbox: return "blackbox";
    case Method::kMultitask: return "multitask";
    case Method::kHierarchical: return "hierarchical";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "blackbox") return Method::kBlackbox;
  if (s == "multitask") return Method::kMultitask;
  if (s == "hierarchical" || s == "hbo") return Method::kHierarchical;
  throw InvalidArgument("unknown method '" + s + "'");
}

inline std::string to_string(Acquisition a) {
  switch (a) {
    case Acquisition::kLcb: return "lcb";
    case Acquisition::kEi: return "ei";
    case Acquisition::kMeanOnly: return "mean-only";
    case Acquisition::kTheoryLcb: return "theory-lcb";
  }
  return "?";
}

inline Acquisition acquisition_from_string(const std::string& s) {
  if (s == "lcb") return Acquisition::kLcb;
  if (s == "ei") return Acquisition::kEi;
  if (s == "mean-only") return Acquisition::kMeanOnly;
  if (s == "theory-lcb") return Acquisition::kTheoryLcb;
  throw InvalidArgument("unknown acquisition '" + s + "'");
}

inline Acquisition default_acquisition(Method m) {
  switch (m) {
    case Method::kBlackbox: return Acquisition::kLcb;
    case Method::kMultitask: return Acquisition::kEi;
    case Method::kHierarchical: return Acquisition::kMeanOnly;
  }
  return Acquisition::kLcb;
}

/// Exploration weight for LCB. `sequence` entries apply to iterations
/// 1, 2, ...; the last one repeats. `calibrated` derives beta from the
/// current posterior instead.
struct BetaSchedule {
  enum class Kind { kConstant, kSequence, kCalibrated };
  Kind kind = Kind::kConstant;
  double constant = 2.0;
  std::vector<double> sequence;
  double confidence = 0.05;

  void validate() const {
    switch (kind) {
      case Kind::kConstant:
        require(std::isfinite(constant) && constant > 0.0, "beta must be positive");
        break;
      case Kind::kSequence:
        require(!sequence.empty(), "beta sequence is empty");
        for (double b : sequence) {
          require(std::isfinite(b) && b > 0.0, "beta sequence must be positive");
        }
        break;
      case Kind::kCalibrated:
        require(confidence > 0.0 && confidence < 1.0,
                "beta confidence must lie in (0, 1)");
        break;
    }
  }

  double at(int t, const gp::ScaledGp& posterior) const {
    switch (kind) {
      case Kind::kConstant: return constant;
      case Kind::kSequence:
        return sequence[std::min<std::size_t>(static_cast<std::size_t>(std::max(t, 1) - 1),
                                              sequence.size() - 1)];
      case Kind::kCalibrated:
        return gp::calibration_beta(posterior.calibration(confidence));
    }
    return constant;
  }
};

struct BoConfig {
  Method method = Method::kHierarchical;
  int budget = 50;
  std::vector<int> task_budgets;  // per-task override of `budget`
  Acquisition acquisition = Acquisition::kMeanOnly;
  BetaSchedule beta;
  AcquisitionSettings search;
  std::uint64_t seed = 0;
  ThetaBox theta_box;
  ParamVector initial_theta;  // (1, 1, 1, 1, 1)

  // Black-box objective GP on (log10 theta) -> J.
  gp::ScaledGpOptions objective_gp = [] {
    gp::ScaledGpOptions o;
    o.fit.fit_noise = true;
    o.fit.restarts = 4;
    return o;
  }();
  IcmOptions multitask_gp;

  // Hierarchical surrogate.
  DynamicsSettings dynamics;
  int refit_every = 5;  // hyperparameter refits every n-th retraining
  State initial_state = (State() << 0.0, 0.0, 0.2, 0.0).finished();
  std::size_t episode_steps = 25;

  static BoConfig for_method(Method m) {
    BoConfig c;
    c.method = m;
    c.acquisition = default_acquisition(m);
    return c;
  }

  int budget_for(std::size_t task_index) const {
    return task_index < task_budgets.size() ? task_budgets[task_index] : budget;
  }

  void validate() const {
    require(budget >= 1, "budget T must be >= 1");
    for (int b : task_budgets) require(b >= 1, "task budgets must be >= 1");
    beta.validate();
    const bool hier_acq = acquisition == Acquisition::kMeanOnly ||
                          acquisition == Acquisition::kTheoryLcb;
    if (method == Method::kHierarchical) {
      require(hier_acq, "acquisition '" + to_string(acquisition) +
                            "' is not available for the hierarchical method");
    } else {
      require(!hier_acq, "acquisition '" + to_string(acquisition) +
                             "' needs the hierarchical method");
    }
    require(search.restarts >= 1 && search.local_steps >= 0 &&
                search.refine_starts >= 0,
            "acquisition search settings must be nonnegative");
    require(refit_every >= 1, "refit_every must be >= 1");
    require(episode_steps >= 1, "episode steps must be >= 1");
    require_in_box(initial_theta, theta_box);
  }
};

/// Closed-loop cost assigned to an aborted episode.
inline constexpr double kAbortedCost = 1e6;

struct EpisodeOutcome {
  double cost = 0.0;
  bool aborted = false;
  std::optional<Trajectory> trajectory;  // absent for synthetic objectives
  std::string error;
};

/// Evaluates J(theta) on `task` with the noise stream keyed by `seed`.
using EpisodeRunner =
    std::function<EpisodeOutcome(const ParamVector&, const Task&, std::uint64_t)>;

/// Episode runner on the simulated plant under the MPC policy.
inline EpisodeRunner plant_runner(PlantConfig plant, OcpConfig ocp, State x0,
                                  std::size_t steps) {
  plant.validate();
  ocp.validate();
  return [plant, ocp, x0, steps](const ParamVector& theta, const Task& task,
                                 std::uint64_t seed) {
    EpisodeOutcome out;
    try {
      Trajectory traj = run_episode(plant, ocp, theta, x0, steps, seed);
      out.cost = closed_loop_cost(traj, task);
      out.trajectory = std::move(traj);
    } catch (const EpisodeAborted& e) {
      out.cost = kAbortedCost;
      out.aborted = true;
      out.error = e.what();
    }
    return out;
  };
}

/// Noise-stream seed of iteration t on task `task_index`: identical across
/// methods so that paired comparisons see the same disturbances.
inline std::uint64_t episode_seed(std::uint64_t run_seed, std::size_t task_index,
                                  int t) {
  return Rng::stream(run_seed, {0x657069736f6465ULL, task_index,
                                static_cast<std::uint64_t>(t)})
      .next();
}

struct IterationRecord {
  int t = 0;
  ParamVector theta;
  double cost = 0.0;
  std::uint64_t seed = 0;
  bool aborted = false;
  double best_so_far = 0.0;
  double cumulative = 0.0;
  double wall_seconds = 0.0;
  // Method diagnostics; NaN when not applicable.
  double surrogate_cost = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
  double posterior_mean = std::numeric_limits<double>::quiet_NaN();
  double posterior_variance = std::numeric_limits<double>::quiet_NaN();
  double acquisition = std::numeric_limits<double>::quiet_NaN();
  bool flat = false;
  std::size_t transitions = 0;  // shared transition rows after this episode
};

struct BoHistory {
  Method method = Method::kBlackbox;
  std::string task;
  std::size_t task_index = 0;
  std::uint64_t seed = 0;
  std::vector<IterationRecord> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  double best() const { return records.back().best_so_far; }

  // Fills t, best_so_far and cumulative.
  void push(IterationRecord r) {
    r.t = static_cast<int>(records.size()) + 1;
    r.best_so_far = records.empty() ? r.cost : std::min(records.back().best_so_far, r.cost);
    r.cumulative = (records.empty() ? 0.0 : records.back().cumulative) + r.cost;
    records.push_back(std::move(r));
  }

  std::vector<double> costs() const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.cost);
    return v;
  }
  std::vector<double> best_series() const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.best_so_far);
    return v;
  }
  std::vector<double> cumulative_series() const {
    std::vector<double> v;
    for (const auto& r : records) v.push_back(r.cumulative);
    return v;
  }
};

namespace detail {

using Clock = std::chrono::steady_clock;

// Runs the episode for `rec.theta` and appends the record; wall time counts
// from `start` (selection included).
inline EpisodeOutcome evaluate(const BoConfig& cfg, BoHistory& history,
                               IterationRecord rec, const Task& task,
                               const EpisodeRunner& runner, Clock::time_point start) {
  const int t = static_cast<int>(history.size()) + 1;
  rec.seed = episode_seed(cfg.seed, history.task_index, t);
  EpisodeOutcome out = runner(rec.theta, task, rec.seed);
  rec.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  require(std::isfinite(out.cost), "episode runner returned a non-finite cost");
  rec.cost = out.cost;
  rec.aborted = out.aborted;
  history.push(std::move(rec));
  return out;
}

inline Rng acquisition_rng(const BoConfig& cfg, std::size_t task_index, int t) {
  return Rng::stream(cfg.seed, {0x616371ULL, static_cast<std::uint64_t>(cfg.method),
                                task_index, static_cast<std::uint64_t>(t)});
}

inline Vector log_theta(const ParamVector& theta) { return theta.log10(); }

inline ParamVector theta_from_log(const Vector& z, const ThetaBox& box) {
  return ParamVector::from_log10(box.log10_box().clamp(z));
}

}  // namespace detail

/// GP on J over log10 theta, trained on `history`.
inline gp::ScaledGp objective_posterior(const BoConfig& cfg,
                                        const BoHistory& history,
                                        std::optional<gp::KernelSpec> previous = {}) {
  const auto n = static_cast<Eigen::Index>(history.size());
  Matrix x(n, kParamDim);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = history.records[static_cast<std::size_t>(i)];
    x.row(i) = r.theta.log10().transpose();
    y[i] = r.cost;
  }
  gp::ScaledGpOptions o = cfg.objective_gp;
  o.fit.seed = cfg.seed ^ 0x6a6770ULL;
  return gp::ScaledGp::train(x, y, 0.0, o, previous);
}

/// Black-box BO on one task: an independent GP on J, LCB (or EI) selection.
inline BoHistory run_blackbox(const BoConfig& cfg, const Task& task,
                              std::size_t task_index, const EpisodeRunner& runner) {
  cfg.validate();
  require(cfg.method == Method::kBlackbox || cfg.method == Method::kMultitask,
          "run_blackbox: method must be blackbox");
  BoHistory h;
  h.method = cfg.method;
  h.task = task.label;
  h.task_index = task_index;
  h.seed = cfg.seed;
  const Box box = cfg.theta_box.log10_box();
  std::optional<gp::KernelSpec> kernel;
  for (int t = 1; t <= cfg.budget_for(task_index); ++t) {
    const auto start = detail::Clock::now();
    IterationRecord rec;
    if (t == 1) {
      rec.theta = cfg.initial_theta;
    } else {
      gp::ScaledGp post = objective_posterior(cfg, h, kernel);
      kernel = post.kernel();
      std::function<double(const Vector&)> acq;
      if (cfg.acquisition == Acquisition::kEi) {
        const double best = h.best();
        acq = [&](const Vector& z) { return -expected_improvement(post.predict(z), best); };
      } else {
        const double beta = cfg.beta.at(t, post);
        acq = [&, beta](const Vector& z) { return lcb(post.predict(z), beta); };
      }
      Rng rng = detail::acquisition_rng(cfg, task_index, t);
      AcquisitionResult sel = optimize_acquisition(acq, box, cfg.search, rng);
      rec.theta = detail::theta_from_log(sel.point, cfg.theta_box);
      gp::Prediction p = post.predict(sel.point);
      rec.posterior_mean = p.mean;
      rec.posterior_variance = p.variance;
      rec.acquisition = sel.value;
      rec.flat = sel.flat;
    }
    detail::evaluate(cfg, h, std::move(rec), task, runner, start);
  }
  return h;
}

/// Multi-task BO over an ordered task stack. Task i is optimized after
/// tasks 0..i-1, with their observations in the shared ICM posterior; EI
/// is computed for the active task.
inline std::vector<BoHistory> run_multitask(const BoConfig& cfg,
                                            const std::vector<Task>& tasks,
                                            const EpisodeRunner& runner) {
  cfg.validate();
  require(cfg.method == Method::kMultitask, "run_multitask: method must be multitask");
  require(!tasks.empty(), "run_multitask: empty task stack");
  const Box box = cfg.theta_box.log10_box();
  std::vector<BoHistory> out;
  TaskObservations obs;
  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Task& task = tasks[ti];
    obs.num_tasks = static_cast<int>(ti) + 1;
    BoHistory h;
    h.method = cfg.method;
    h.task = task.label;
    h.task_index = ti;
    h.seed = cfg.seed;
    std::optional<Vector> warm;
    for (int t = 1; t <= cfg.budget_for(ti); ++t) {
      const auto start = detail::Clock::now();
      IterationRecord rec;
      if (t == 1) {
        rec.theta = cfg.initial_theta;
      } else {
        IcmOptions o = cfg.multitask_gp;
        o.seed = cfg.seed ^ (0x69636dULL + ti);
        // Hyperparameters are refit at the first model of each task and then
        // every refit_every iterations; in between only the data changes.
        const bool refit = !warm || (t - 2) % cfg.refit_every == 0;
        IcmGp model = refit ? IcmGp::fit(obs, o, warm) : IcmGp::with_params(obs, o, *warm);
        warm = model.params();
        const int active = static_cast<int>(ti);
        const double best = h.best();
        auto acq = [&](const Vector& z) {
          return -expected_improvement(model.predict(z, active), best);
        };
        Rng rng = detail::acquisition_rng(cfg, ti, t);
        AcquisitionResult sel = optimize_acquisition(acq, box, cfg.search, rng);
        rec.theta = detail::theta_from_log(sel.point, cfg.theta_box);
        gp::Prediction p = model.predict(sel.point, active);
        rec.posterior_mean = p.mean;
        rec.posterior_variance = p.variance;
        rec.acquisition = sel.value;
        rec.flat = sel.flat;
      }
      detail::evaluate(cfg, h, std::move(rec), task, runner, start);
      const IterationRecord& last = h.records.back();
      obs.add(last.theta.log10(), static_cast<int>(ti), last.cost);
    }
    out.push_back(std::move(h));
  }
  return out;
}

/// Surrogate cost and bound of theta under a dynamics model.
struct SurrogateValue {
  double cost = std::numeric_limits<double>::infinity();
  double bound = std::numeric_limits<double>::quiet_NaN();
  bool ok = false;
};

inline SurrogateValue evaluate_surrogate(const DynamicsModel& model,
                                         const Task& task, const State& x0,
                                         const ParamVector& theta,
                                         std::size_t steps, bool with_bound,
                                         double stage_lipschitz) {
  SurrogateValue v;
  try {
    Rollout r = rollout_mean(model, x0, theta, steps, with_bound);
    v.cost = surrogate_cost(r, task);
    if (with_bound) v.bound = cost_bound(r, stage_lipschitz);
    v.ok = std::isfinite(v.cost) && (!with_bound || std::isfinite(v.bound));
  } catch (const NumericalFailure&) {
    v.ok = false;
  }
  return v;
}

/// L_l for a task: from the observed z range when there is data, else from
/// the unit box around the origin.
inline double task_stage_lipschitz(const Task& task, const TransitionSet& data) {
  if (data.empty()) {
    return estimate_stage_lipschitz(
        task, Box{Vector::Constant(kStageDim, -1.0), Vector::Constant(kStageDim, 1.0)});
  }
  return estimate_stage_lipschitz(task, stage_region(data));
}

/// arg min over log10 Theta of J_hat (mean-only) or J_hat - chi (theory-lcb).
/// Rollouts that fail numerically score +inf.
inline AcquisitionResult select_hierarchical(const BoConfig& cfg,
                                             const DynamicsModel& model,
                                             const Task& task,
                                             double stage_lipschitz, Rng& rng) {
  const bool theory = cfg.acquisition == Acquisition::kTheoryLcb;
  auto acq = [&](const Vector& z) {
    SurrogateValue v = evaluate_surrogate(
        model, task, cfg.initial_state, detail::theta_from_log(z, cfg.theta_box),
        cfg.episode_steps, theory, stage_lipschitz);
    if (!v.ok) return std::numeric_limits<double>::infinity();
    return theory ? v.cost - v.bound : v.cost;
  };
  return optimize_acquisition(acq, cfg.theta_box.log10_box(), cfg.search, rng);
}

struct HierarchicalResult {
  std::vector<BoHistory> histories;
  TransitionSet transitions;
  DynamicsModel model;
};

/// Hierarchical BO over an ordered task stack with one shared transition
/// set; the task only enters through the stage cost used for aggregation.
inline HierarchicalResult run_hierarchical(const BoConfig& cfg,
                                           const std::vector<Task>& tasks,
                                           const EpisodeRunner& runner,
                                           TransitionSet initial = {}) {
  cfg.validate();
  require(cfg.method == Method::kHierarchical,
          "run_hierarchical: method must be hierarchical");
  require(!tasks.empty(), "run_hierarchical: empty task stack");
  HierarchicalResult res;
  res.transitions = std::move(initial);
  int trainings = 0;
  auto retrain = [&] {
    const bool refit = trainings % cfg.refit_every == 0;
    DynamicsModel prev = res.model;
    res.model = train_dynamics(res.transitions, cfg.dynamics, refit,
                               trainings > 0 ? &prev : nullptr);
    ++trainings;
  };
  res.model = untrained_dynamics(cfg.dynamics);
  if (!res.transitions.empty()) retrain();

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const Task& task = tasks[ti];
    BoHistory h;
    h.method = cfg.method;
    h.task = task.label;
    h.task_index = ti;
    h.seed = cfg.seed;
    for (int t = 1; t <= cfg.budget_for(ti); ++t) {
      const double l_stage = task_stage_lipschitz(task, res.transitions);
      const auto start = detail::Clock::now();
      IterationRecord rec;
      if (t == 1) {
        rec.theta = cfg.initial_theta;
      } else {
        Rng rng = detail::acquisition_rng(cfg, ti, t);
        AcquisitionResult sel = select_hierarchical(cfg, res.model, task, l_stage, rng);
        rec.theta = detail::theta_from_log(sel.point, cfg.theta_box);
        rec.acquisition = sel.value;
        rec.flat = sel.flat;
      }
      SurrogateValue diag = evaluate_surrogate(res.model, task, cfg.initial_state,
                                               rec.theta, cfg.episode_steps, true,
                                               l_stage);
      rec.surrogate_cost = diag.ok ? diag.cost : std::numeric_limits<double>::quiet_NaN();
      rec.bound = diag.ok ? diag.bound : std::numeric_limits<double>::quiet_NaN();
      EpisodeOutcome out = detail::evaluate(cfg, h, std::move(rec), task, runner, start);
      if (!out.aborted && out.trajectory) {
        res.transitions.append(extract_transitions(*out.trajectory));
        retrain();
      }
      h.records.back().transitions = res.transitions.size();
      h.records.back().wall_seconds =
          std::chrono::duration<double>(detail::Clock::now() - start).count();
    }
    res.histories.push_back(std::move(h));
  }
  return res;
}

struct RegretSeries {
  std::vector<double> simple_regret;      // best_so_far_t - reference
  std::vector<double> cumulative_regret;  // sum_s (J_s - reference)
  std::vector<double> cumulative_cost;    // sum_s J_s
};

inline RegretSeries regret_accounting(const BoHistory& history, double reference) {
  require(!history.empty(), "regret_accounting: empty history");
  RegretSeries r;
  double cum_regret = 0.0;
  for (const auto& rec : history.records) {
    r.simple_regret.push_back(rec.best_so_far - reference);
    cum_regret += rec.cost - reference;
    r.cumulative_regret.push_back(cum_regret);
    r.cumulative_cost.push_back(rec.cumulative);
  }
  return r;
}

/// Least-squares slope of log y against log t over t in [first, last]
/// (1-based, inclusive).
inline double power_law_slope(const std::vector<double>& series, int first, int last) {
  require(first >= 1 && last <= static_cast<int>(series.size()) && last > first,
          "power_law_slope: bad range");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const int n = last - first + 1;
  for (int t = first; t <= last; ++t) {
    const double y = series[static_cast<std::size_t>(t - 1)];
    require(y > 0.0, "power_law_slope: series must be positive");
    const double lx = std::log(static_cast<double>(t));
    const double ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace hbo::bo
