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

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hbo/core.hpp"
#include "hbo/mpc.hpp"
#include "hbo/plant.hpp"
#include "hbo/random.hpp"

namespace hbo {

/// Closed-loop evaluation weights. The stage cost on z = (x, u) is
/// x' Q_cl x + R_cl u^2.
struct Task {
  State state_weights = State::Ones();  // diag(Q_cl)
  double input_weight = 1.0;            // R_cl
  std::string label = "task";

  Task() = default;
  Task(State q, double r, std::string name)
      : state_weights(std::move(q)), input_weight(r), label(std::move(name)) {
    validate();
  }

  void validate() const {
    require(state_weights.allFinite() && (state_weights.array() >= 0.0).all(),
            "task: state weights must be nonnegative");
    require(std::isfinite(input_weight) && input_weight > 0.0,
            "task: input weight must be positive");
  }

  StageVector weights() const {
    StageVector w;
    w << state_weights, input_weight;
    return w;
  }

  double stage_cost(const StageVector& z) const {
    return (weights().array() * z.array().square()).sum();
  }

  // The two evaluation tasks of the cart-pole study.
  static Task task1() {
    return Task((State() << 5.0, 0.1, 5.0, 0.1).finished(), 0.1, "task1");
  }
  static Task task2() {
    return Task((State() << 4.0, 0.2, 4.0, 0.2).finished(), 0.2, "task2");
  }
};

/// x_0, then (u_k, x_{k+1}) for k = 0..K-1.
struct Trajectory {
  State initial_state = State::Zero();
  std::vector<double> inputs;
  std::vector<State> states;  // x_1..x_K
  ParamVector theta;
  std::uint64_t seed = 0;

  std::size_t steps() const { return inputs.size(); }

  const State& state(std::size_t k) const {
    return k == 0 ? initial_state : states.at(k - 1);
  }

  StageVector stage(std::size_t k) const {  // z_{k+1} = (x_{k+1}, u_k)
    StageVector z;
    z << states.at(k), inputs.at(k);
    return z;
  }

  // Steps [first, first + count) as a trajectory of their own.
  Trajectory slice(std::size_t first, std::size_t count) const {
    require(first + count <= steps(), "trajectory slice out of range");
    Trajectory t;
    t.initial_state = state(first);
    t.theta = theta;
    t.seed = seed;
    for (std::size_t k = first; k < first + count; ++k) {
      t.inputs.push_back(inputs[k]);
      t.states.push_back(states[k]);
    }
    return t;
  }
};

/// MPC failure during an episode.
class EpisodeAborted : public NumericalFailure {
 public:
  EpisodeAborted(std::size_t step, const std::string& what)
      : NumericalFailure("episode aborted at step " + std::to_string(step) +
                         ": " + what),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Runs K closed-loop steps of pi(.; theta) on the noisy plant. The noise
/// stream is keyed by `seed` alone.
inline Trajectory run_episode(const PlantConfig& plant, const OcpConfig& ocp,
                              const ParamVector& theta, const State& x0,
                              std::size_t steps, std::uint64_t seed) {
  plant.validate();
  require_in_box(theta, ocp.theta_box);
  require(x0.allFinite(), "run_episode: non-finite initial state");
  Trajectory traj;
  traj.initial_state = x0;
  traj.theta = theta;
  traj.seed = seed;
  traj.inputs.reserve(steps);
  traj.states.reserve(steps);
  Rng rng = Rng::stream(seed, {0x6e6f697365ULL});
  MpcPolicy policy(plant, ocp);
  State x = x0;
  for (std::size_t k = 0; k < steps; ++k) {
    double u = 0.0;
    try {
      u = policy(x, theta);
    } catch (const NumericalFailure& e) {
      throw EpisodeAborted(k, e.what());
    }
    x = step_noisy(plant, x, u, rng);
    if (!x.allFinite()) throw EpisodeAborted(k, "non-finite plant state");
    traj.inputs.push_back(u);
    traj.states.push_back(x);
  }
  return traj;
}

/// sum_{k=0}^{K-1} x_{k+1}' Q_cl x_{k+1} + R_cl u_k^2.
inline double closed_loop_cost(const Trajectory& traj, const Task& task) {
  double total = 0.0;
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    total += task.stage_cost(traj.stage(k));
  }
  return total;
}

struct TransitionRow {
  State state;          // x_k
  ParamVector theta;
  StageVector target;   // z_{k+1} = (x_{k+1}, u_k)
};

/// Transition data ((x_k, theta) -> z_{k+1}) pooled across episodes and tasks.
/// Rows carry no task label.
class TransitionSet {
 public:
  void append(const std::vector<TransitionRow>& rows) {
    rows_.insert(rows_.end(), rows.begin(), rows.end());
  }
  std::size_t size() const { return rows_.size(); }
  bool empty() const { return rows_.empty(); }
  const std::vector<TransitionRow>& rows() const { return rows_; }
  const TransitionRow& operator[](std::size_t i) const { return rows_[i]; }

  // Inputs (x_k, log10 theta): size() x 9.
  Matrix features() const {
    Matrix f(static_cast<Eigen::Index>(rows_.size()), kFeatureDim);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      f.row(r).head<kStateDim>() = rows_[i].state.transpose();
      f.row(r).tail<kParamDim>() = rows_[i].theta.log10().transpose();
    }
    return f;
  }

  // Targets z: size() x 5.
  Matrix targets() const {
    Matrix t(static_cast<Eigen::Index>(rows_.size()), kStageDim);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
      t.row(static_cast<Eigen::Index>(i)) = rows_[i].target.transpose();
    }
    return t;
  }

 private:
  std::vector<TransitionRow> rows_;
};

inline std::vector<TransitionRow> extract_transitions(const Trajectory& traj) {
  std::vector<TransitionRow> rows;
  rows.reserve(traj.steps());
  for (std::size_t k = 0; k < traj.steps(); ++k) {
    rows.push_back({traj.state(k), traj.theta, traj.stage(k)});
  }
  return rows;
}

/// Bound on |grad l(z)| = |2 W z| over a box in z-space: the maximum is
/// attained at a corner.
inline double estimate_stage_lipschitz(const Task& task, const Box& region) {
  require(region.dim() == kStageDim, "stage Lipschitz region must be 5-D");
  require(region.bounded(), "stage Lipschitz region must be bounded");
  StageVector w = task.weights();
  double best = 0.0;
  for (unsigned corner = 0; corner < (1u << kStageDim); ++corner) {
    StageVector z;
    for (int i = 0; i < kStageDim; ++i) {
      z[i] = (corner >> i) & 1u ? region.upper[i] : region.lower[i];
    }
    best = std::max(best, (w.array() * z.array()).matrix().norm());
  }
  return 2.0 * best;
}

/// CSV with a metadata comment line:
///   # theta=q1,q2,q3,q4,r seed=S
///   k,x1,x2,x3,x4,u
/// Row k holds x_k and u_k; the final row (k = K) leaves u empty.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# theta=";
  for (int i = 0; i < kParamDim; ++i) os << (i ? "," : "") << traj.theta[i];
  os << " seed=" << traj.seed << '\n';
  os << "k,x1,x2,x3,x4,u\n";
  for (std::size_t k = 0; k <= traj.steps(); ++k) {
    const State& x = traj.state(k);
    os << k << ',' << x[0] << ',' << x[1] << ',' << x[2] << ',' << x[3] << ',';
    if (k < traj.steps()) os << traj.inputs[k];
    os << '\n';
  }
}

inline Trajectory read_trajectory_csv(std::istream& is) {
  Trajectory traj;
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line.rfind("# theta=", 0) == 0,
          "trajectory csv: missing metadata line");
  {
    std::string body = line.substr(8);
    auto space = body.find(" seed=");
    require(space != std::string::npos, "trajectory csv: missing seed");
    std::istringstream th(body.substr(0, space));
    ParamVector::Values v;
    std::string cell;
    for (int i = 0; i < kParamDim; ++i) {
      require(static_cast<bool>(std::getline(th, cell, ',')), "trajectory csv: theta");
      v[i] = std::stod(cell);
    }
    traj.theta = ParamVector(v);
    traj.seed = std::stoull(body.substr(space + 6));
  }
  std::getline(is, line);  // header
  std::vector<std::pair<State, std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream rs(line);
    std::string cell;
    std::getline(rs, cell, ',');
    State x;
    for (int i = 0; i < kStateDim; ++i) {
      std::getline(rs, cell, ',');
      x[i] = std::stod(cell);
    }
    std::string u;
    std::getline(rs, u);
    rows.emplace_back(x, u);
  }
  require(!rows.empty(), "trajectory csv: no rows");
  traj.initial_state = rows.front().first;
  for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
    traj.inputs.push_back(std::stod(rows[k].second));
    traj.states.push_back(rows[k + 1].first);
  }
  return traj;
}

}  // namespace hbo
