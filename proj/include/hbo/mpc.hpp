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
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hbo/core.hpp"
#include "hbo/plant.hpp"

namespace hbo {

/// MPC cost weights: diag(Q) = values[0..3], R = values[4].
class ParamVector {
 public:
  using Values = Eigen::Matrix<double, kParamDim, 1>;

  ParamVector() : values_(Values::Ones()) {}
  explicit ParamVector(const Values& v) : values_(v) {
    require(values_.allFinite() && (values_.array() > 0.0).all(),
            "ParamVector: weights must be finite and positive");
  }
  ParamVector(double q1, double q2, double q3, double q4, double r)
      : ParamVector(make(q1, q2, q3, q4, r)) {}

  static ParamVector from_log10(const Vector& log_values) {
    require(log_values.size() == kParamDim, "ParamVector: need 5 entries");
    Values v;
    for (int i = 0; i < kParamDim; ++i) v[i] = std::pow(10.0, log_values[i]);
    return ParamVector(v);
  }

  const Values& values() const { return values_; }
  double operator[](int i) const { return values_[i]; }
  Values log10() const { return values_.array().log10(); }
  auto state_weights() const { return values_.head<kStateDim>(); }
  double input_weight() const { return values_[kStateDim]; }

  ParamVector scaled(double c) const { return ParamVector(values_ * c); }

  std::string str() const {
    std::ostringstream os;
    os << '(';
    for (int i = 0; i < kParamDim; ++i) os << (i ? ", " : "") << values_[i];
    os << ')';
    return os.str();
  }

 private:
  static Values make(double q1, double q2, double q3, double q4, double r) {
    Values v;
    v << q1, q2, q3, q4, r;
    return v;
  }
  Values values_;
};

/// Search box Theta, identical bounds on every component; searched in log10.
struct ThetaBox {
  double lower = 0.01;
  double upper = 100.0;

  bool contains(const ParamVector& theta) const {
    const double slack = 1e-12;
    return (theta.values().array() >= lower * (1.0 - slack)).all() &&
           (theta.values().array() <= upper * (1.0 + slack)).all();
  }

  Box log10_box() const {
    return {Vector::Constant(kParamDim, std::log10(lower)),
            Vector::Constant(kParamDim, std::log10(upper))};
  }
};

inline void require_in_box(const ParamVector& theta, const ThetaBox& box) {
  if (!box.contains(theta)) {
    throw InvalidArgument("theta " + theta.str() + " lies outside the search box");
  }
}

/// x' Q(theta) x + R(theta) u^2.
inline double stage_cost(const State& x, double u, const ParamVector& theta,
                         const ThetaBox& box = {}) {
  require_in_box(theta, box);
  return (theta.state_weights().array() * x.array().square()).sum() +
         theta.input_weight() * u * u;
}

struct SolverSettings {
  int max_iterations = 200;
  double tolerance = 1e-6;  // projected-gradient norm
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 40;
};

struct OcpConfig {
  int horizon = 20;
  double input_bound = 10.0;
  State state_lower = (State() << -2.4, -10.0, -1.5, -10.0).finished();
  State state_upper = (State() << 2.4, 10.0, 1.5, 10.0).finished();
  double state_penalty = 1e3;
  double terminal_weight = 10.0;
  SolverSettings solver;
  ThetaBox theta_box;

  void validate() const {
    require(horizon >= 1, "ocp: horizon must be >= 1");
    require(input_bound > 0.0, "ocp: input bound must be positive");
    require((state_upper.array() >= state_lower.array()).all(),
            "ocp: state bounds out of order");
    require(state_penalty >= 0.0 && terminal_weight >= 0.0,
            "ocp: penalty and terminal weight must be nonnegative");
    require(solver.tolerance > 0.0 && solver.max_iterations >= 0,
            "ocp: solver tolerance must be positive");
  }
};

struct OcpSolution {
  Vector inputs;               // u_0..u_{N-1}
  std::vector<State> states;   // x_1..x_N
  double objective = 0.0;
  double initial_objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

/// Single-shooting transcription of the finite-horizon problem with stage
/// cost l_theta, terminal cost terminal_weight * x_N' Q x_N and quadratic
/// penalties on state-box violations.
class ShootingProblem {
 public:
  ShootingProblem(const PlantConfig& plant, const OcpConfig& cfg,
                  const State& x0, const ParamVector& theta)
      : plant_(plant), cfg_(cfg), x0_(x0), q_(theta.state_weights()),
        r_(theta.input_weight()) {}

  int horizon() const { return cfg_.horizon; }

  double penalty(const State& x) const {
    State over = (x - cfg_.state_upper).cwiseMax(0.0);
    State under = (cfg_.state_lower - x).cwiseMax(0.0);
    return cfg_.state_penalty * (over.squaredNorm() + under.squaredNorm());
  }

  State penalty_gradient(const State& x) const {
    State over = (x - cfg_.state_upper).cwiseMax(0.0);
    State under = (cfg_.state_lower - x).cwiseMax(0.0);
    return 2.0 * cfg_.state_penalty * (over - under);
  }

  double quad(const State& x) const {
    return (q_.array() * x.array().square()).sum();
  }

  double objective(const Vector& u, std::vector<State>* states = nullptr) const {
    State x = x0_;
    double total = 0.0;
    if (states) states->clear();
    for (int i = 0; i < cfg_.horizon; ++i) {
      total += quad(x) + r_ * u[i] * u[i];
      x = rk4_step(plant_, x, u[i]);
      total += penalty(x);
      if (states) states->push_back(x);
    }
    total += cfg_.terminal_weight * quad(x);
    return total;
  }

  /// Objective and its gradient via the adjoint recursion through RK4.
  double objective_and_gradient(const Vector& u, Vector& grad) const {
    const int n = cfg_.horizon;
    std::vector<State> xs(static_cast<std::size_t>(n) + 1);
    std::vector<Eigen::Matrix4d> a(static_cast<std::size_t>(n));
    std::vector<State> b(static_cast<std::size_t>(n));
    xs[0] = x0_;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      total += quad(xs[si]) + r_ * u[i] * u[i];
      LinearizedStep step = rk4_step_linearized(plant_, xs[si], u[i]);
      xs[si + 1] = step.next;
      a[si] = step.state_jacobian;
      b[si] = step.input_jacobian;
      total += penalty(step.next);
    }
    const State& xn = xs[static_cast<std::size_t>(n)];
    total += cfg_.terminal_weight * quad(xn);

    grad.resize(n);
    State lambda = 2.0 * cfg_.terminal_weight * (q_.array() * xn.array()).matrix() +
                   penalty_gradient(xn);
    for (int i = n - 1; i >= 0; --i) {
      const auto si = static_cast<std::size_t>(i);
      grad[i] = 2.0 * r_ * u[i] + b[si].dot(lambda);
      State dl = 2.0 * (q_.array() * xs[si].array()).matrix();
      if (i > 0) dl += penalty_gradient(xs[si]);
      lambda = dl + a[si].transpose() * lambda;
    }
    return total;
  }

 private:
  const PlantConfig& plant_;
  const OcpConfig& cfg_;
  State x0_;
  State q_;
  double r_;
};

/// Projected gradient descent on the shooting objective: Barzilai-Borwein
/// trial steps, Armijo backtracking, projection onto |u| <= input_bound.
/// Accepted iterates never increase the objective. `log`, when given,
/// receives one "iteration objective gradient_norm" line per iteration.
inline OcpSolution solve_ocp(const PlantConfig& plant, const OcpConfig& cfg,
                             const State& x0, const ParamVector& theta,
                             const std::optional<Vector>& warm_start = {},
                             std::ostream* log = nullptr) {
  cfg.validate();
  require(x0.allFinite(), "solve_ocp: non-finite initial state");
  require_in_box(theta, cfg.theta_box);
  const int n = cfg.horizon;
  const double ub = cfg.input_bound;
  auto project = [ub](Vector v) { return Vector(v.cwiseMax(-ub).cwiseMin(ub)); };

  ShootingProblem problem(plant, cfg, x0, theta);
  OcpSolution sol;
  Vector u = warm_start && warm_start->size() == n ? project(*warm_start)
                                                   : Vector::Zero(n);
  Vector g;
  double f = problem.objective_and_gradient(u, g);
  if (!std::isfinite(f) || !g.allFinite()) {
    throw NumericalFailure("solve_ocp: non-finite objective " +
                           std::to_string(f) + " at the initial input sequence");
  }
  sol.initial_objective = f;

  const SolverSettings& s = cfg.solver;
  double step = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());
  Vector prev_u, prev_g;
  int it = 0;
  double pg_norm = (project(u - g) - u).norm();
  for (; it < s.max_iterations; ++it) {
    if (log) *log << it << ' ' << f << ' ' << pg_norm << '\n';
    if (pg_norm < s.tolerance) {
      sol.converged = true;
      break;
    }
    if (prev_u.size() > 0) {
      Vector du = u - prev_u;
      Vector dg = g - prev_g;
      double sy = du.dot(dg);
      if (sy > 1e-20) step = std::clamp(du.squaredNorm() / sy, 1e-10, 1e4);
    }
    bool accepted = false;
    double trial = step;
    for (int bt = 0; bt < s.max_backtracks; ++bt) {
      Vector cand = project(u - trial * g);
      Vector delta = cand - u;
      if (delta.squaredNorm() == 0.0) break;
      double fc = problem.objective(cand);
      if (std::isfinite(fc) && fc <= f + s.armijo * g.dot(delta)) {
        prev_u = std::move(u);
        prev_g = g;
        u = std::move(cand);
        f = problem.objective_and_gradient(u, g);
        if (!std::isfinite(f) || !g.allFinite()) {
          throw NumericalFailure("solve_ocp: non-finite gradient at iteration " +
                                 std::to_string(it));
        }
        accepted = true;
        break;
      }
      trial *= s.backtrack;
    }
    pg_norm = (project(u - g) - u).norm();
    if (!accepted) {
      // No descent possible along the projected gradient: stationary up to
      // floating point.
      sol.converged = pg_norm < std::sqrt(s.tolerance);
      break;
    }
  }
  if (it == s.max_iterations && pg_norm < s.tolerance) sol.converged = true;
  sol.iterations = it;
  sol.gradient_norm = pg_norm;
  sol.inputs = u;
  sol.objective = problem.objective(u, &sol.states);
  if (!std::isfinite(sol.objective)) {
    throw NumericalFailure("solve_ocp: non-finite objective at the solution");
  }
  return sol;
}

/// Receding-horizon policy pi(x; theta) with a warm-start cache that is
/// shifted by one step after every solve.
class MpcPolicy {
 public:
  MpcPolicy(PlantConfig plant, OcpConfig cfg)
      : plant_(std::move(plant)), cfg_(std::move(cfg)) {}

  double operator()(const State& x, const ParamVector& theta) {
    OcpSolution sol = solve_ocp(plant_, cfg_, x, theta, cache_);
    last_ = sol;
    const int n = cfg_.horizon;
    Vector shifted(n);
    shifted.head(n - 1) = sol.inputs.tail(n - 1);
    shifted[n - 1] = sol.inputs[n - 1];
    cache_ = shifted;
    return std::clamp(sol.inputs[0], -cfg_.input_bound, cfg_.input_bound);
  }

  void reset() {
    cache_.reset();
    last_.reset();
  }

  const std::optional<Vector>& cache() const { return cache_; }
  const std::optional<OcpSolution>& last_solution() const { return last_; }
  const OcpConfig& config() const { return cfg_; }

 private:
  PlantConfig plant_;
  OcpConfig cfg_;
  std::optional<Vector> cache_;
  std::optional<OcpSolution> last_;
};

}  // namespace hbo
