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

// End-to-end acceptance checks. Shared by the `acceptance` test binary and
// `hbo validate`. Reference computations here are deliberately independent
// of the library code paths they check.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hbo/bo/optimizers.hpp"
#include "hbo/closed_loop.hpp"
#include "hbo/gp/calibration.hpp"
#include "hbo/gp/multi_output.hpp"
#include "hbo/gp/posterior.hpp"
#include "hbo/harness/study.hpp"
#include "hbo/mpc.hpp"
#include "hbo/plant.hpp"
#include "hbo/surrogate.hpp"

namespace hbo::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;  // 0: no runtime limit

  std::string line() const {
    std::ostringstream os;
    os << (passed ? "PASS" : "FAIL") << "  criterion " << id << "  " << name << ": "
       << detail << "  [" << std::fixed << std::setprecision(1) << seconds << " s";
    if (budget_seconds > 0.0) os << " / limit " << budget_seconds << " s";
    os << "]";
    return os.str();
  }
};

using Clock = std::chrono::steady_clock;

inline double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

inline std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Independent references.

/// Squared-exponential ARD kernel written out directly.
inline double ref_se(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double sf2,
                     const Eigen::VectorXd& ell) {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = (a[i] - b[i]) / ell[i];
    r2 += d * d;
  }
  return sf2 * std::exp(-0.5 * r2);
}

/// Posterior mean and variance by an explicit dense inverse (LU).
inline std::pair<double, double> dense_posterior(const Eigen::MatrixXd& x,
                                                 const Eigen::VectorXd& y, double noise,
                                                 double sf2, const Eigen::VectorXd& ell,
                                                 const Eigen::VectorXd& q) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd ks(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ks[i] = ref_se(x.row(i).transpose(), q, sf2, ell);
    for (Eigen::Index j = 0; j < n; ++j) {
      k(i, j) = ref_se(x.row(i).transpose(), x.row(j).transpose(), sf2, ell);
    }
  }
  k.diagonal().array() += noise;
  Eigen::MatrixXd kinv = k.fullPivLu().inverse();
  return {ks.dot(kinv * y), sf2 - ks.dot(kinv * ks)};
}

/// A function in the RKHS of `kernel`: f(.) = k(., C) w, with its exact norm.
struct RkhsFunction {
  gp::KernelSpec kernel;
  Eigen::MatrixXd centers;
  Eigen::VectorXd weights;
  double norm = 0.0;

  double operator()(const Eigen::VectorXd& q) const {
    double v = 0.0;
    for (Eigen::Index i = 0; i < centers.rows(); ++i) {
      v += weights[i] *
           ref_se(centers.row(i).transpose(), q, kernel.signal_variance, kernel.lengthscales);
    }
    return v;
  }
};

/// Values g ~ N(0, K_CC) at the centers, interpolated: w = K_CC^{-1} g, so
/// the function agrees with a prior draw on C and |f|_H = sqrt(g' K^{-1} g).
inline RkhsFunction draw_rkhs_function(const gp::KernelSpec& kernel,
                                       const Eigen::MatrixXd& centers, Rng& rng) {
  const Eigen::Index m = centers.rows();
  Eigen::MatrixXd k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      k(i, j) = ref_se(centers.row(i).transpose(), centers.row(j).transpose(),
                       kernel.signal_variance, kernel.lengthscales);
    }
  }
  k.diagonal().array() += 1e-8 * kernel.signal_variance;
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  Eigen::VectorXd z(m);
  for (Eigen::Index i = 0; i < m; ++i) z[i] = rng.normal();
  Eigen::VectorXd g = llt.matrixL() * z;
  RkhsFunction f;
  f.kernel = kernel;
  f.centers = centers;
  f.weights = llt.solve(g);
  f.norm = std::sqrt(std::max(0.0, g.dot(f.weights)));
  return f;
}

// ---------------------------------------------------------------------------
// Criterion 1: exact posterior against the dense-solve reference.

inline CriterionResult gp_exactness(int datasets = 200) {
  auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int s = 0; s < datasets; ++s) {
    const int d = 1 + static_cast<int>(rng.index(9));
    const int n = 1 + static_cast<int>(rng.index(10));
    Eigen::MatrixXd x(n, d);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) x(i, j) = rng.uniform(-2.0, 2.0);
      y[i] = rng.normal();
    }
    const double sf2 = std::exp(rng.uniform(-1.0, 1.0));
    Eigen::VectorXd ell(d);
    for (int j = 0; j < d; ++j) ell[j] = std::exp(rng.uniform(-0.5, 1.0));
    const double noise = std::exp(rng.uniform(std::log(1e-3), std::log(1e-1)));
    gp::KernelSpec k(gp::KernelKind::kSquaredExponential, sf2, ell);
    gp::GpPosterior post = gp::condition(k, gp::GpDataset(x, y, noise), 0.0);
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd pt(d);
      for (int j = 0; j < d; ++j) pt[j] = rng.uniform(-2.5, 2.5);
      auto [m_ref, v_ref] = dense_posterior(x, y, noise + post.jitter(), sf2, ell, pt);
      gp::Prediction p = post.predict(pt);
      worst = std::max({worst, std::abs(p.mean - m_ref), std::abs(p.variance - v_ref)});
    }
  }
  CriterionResult r{1, "GP exactness", false, "", since(t0), 10.0};
  r.passed = worst <= 1e-8 && r.seconds < r.budget_seconds;
  r.detail = "max |diff| " + num(worst, 3) + " over " + std::to_string(datasets) +
             " datasets (tol 1e-8)";
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 2: coverage of the beta(delta') band on functions of known norm.

inline CriterionResult calibration_coverage(int functions = 200) {
  auto t0 = Clock::now();
  Rng rng(202);
  const double noise_sd = 0.1;
  const double delta = 0.05;
  gp::KernelSpec kernel(gp::KernelKind::kSquaredExponential, 1.0, Vector::Constant(1, 0.2));
  long covered = 0, total = 0;
  for (int f_i = 0; f_i < functions; ++f_i) {
    Eigen::MatrixXd centers(15, 1);
    for (int i = 0; i < 15; ++i) centers(i, 0) = rng.uniform(0.0, 1.0);
    RkhsFunction f = draw_rkhs_function(kernel, centers, rng);
    const int n = 12;
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform(0.0, 1.0);
      y[i] = f(x.row(i).transpose()) + noise_sd * rng.normal();
    }
    gp::GpPosterior post = gp::condition(kernel, gp::GpDataset(x, y, noise_sd * noise_sd), 0.0);
    gp::CalibrationConfig cal;
    cal.rkhs_bound = f.norm;
    cal.noise_subgaussian = noise_sd;
    cal.info_gain = post.information_gain();
    cal.confidence = delta;
    const double beta = gp::calibration_beta(cal);
    for (int g = 0; g <= 100; ++g) {
      Eigen::VectorXd q(1);
      q[0] = g / 100.0;
      gp::Prediction p = post.predict(q);
      covered += std::abs(p.mean - f(q)) <= beta * std::sqrt(p.variance) ? 1 : 0;
      ++total;
    }
  }
  const double rate = static_cast<double>(covered) / static_cast<double>(total);
  CriterionResult r{2, "calibration coverage", false, "", since(t0), 60.0};
  r.passed = rate >= 0.95 && r.seconds < r.budget_seconds;
  r.detail = "coverage " + num(rate) + " at " + std::to_string(total) +
             " grid points (need >= 0.95)";
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 3: multi-step error radii and cost bound on synthetic systems.

struct SyntheticSystem {
  std::vector<RkhsFunction> residual;  // z - (x, 0), one per output

  StageVector step(const State& x, const ParamVector& theta) const {
    FeatureVector f = DynamicsModel::raw_feature(x, theta);
    StageVector z;
    for (int i = 0; i < kStageDim; ++i) z[i] = residual[static_cast<std::size_t>(i)](f);
    z.head<kStateDim>() += x;
    return z;
  }

  std::vector<StageVector> rollout(const State& x0, const ParamVector& theta, int steps) const {
    std::vector<StageVector> zs;
    State x = x0;
    for (int k = 0; k < steps; ++k) {
      zs.push_back(step(x, theta));
      x = zs.back().head<kStateDim>();
    }
    return zs;
  }
};

inline CriterionResult multistep_bound(int systems = 100) {
  auto t0 = Clock::now();
  Rng rng(303);
  const int horizon = 10;
  const double delta = 0.05 / horizon;
  Vector ell(kFeatureDim);
  ell << 1.0, 1.0, 1.0, 1.0, 1.5, 1.5, 1.5, 1.5, 1.5;
  gp::KernelSpec kernel(gp::KernelKind::kSquaredExponential, 0.01, ell);
  const State x0 = (State() << 0.0, 0.0, 0.2, 0.0).finished();
  const Task task = Task::task1();
  long state_ok = 0, state_total = 0, cost_ok = 0, cost_total = 0;
  std::vector<double> tightness;  // |mu^k - f^k| / nu^k
  for (int s = 0; s < systems; ++s) {
    Eigen::MatrixXd centers(30, kFeatureDim);
    for (int i = 0; i < centers.rows(); ++i) {
      for (int j = 0; j < kStateDim; ++j) centers(i, j) = rng.uniform(-0.6, 0.6);
      for (int j = kStateDim; j < kFeatureDim; ++j) centers(i, j) = rng.uniform(-2.0, 2.0);
    }
    SyntheticSystem sys;
    for (int i = 0; i < kStageDim; ++i) sys.residual.push_back(draw_rkhs_function(kernel, centers, rng));

    // Training rows from rollouts of the true system at a few parameters.
    TransitionSet data;
    auto draw_theta = [&] {
      Vector z(kParamDim);
      for (int i = 0; i < kParamDim; ++i) z[i] = rng.uniform(-2.0, 2.0);
      return ParamVector::from_log10(z);
    };
    std::vector<ParamVector> train_thetas;
    for (int e = 0; e < 8; ++e) train_thetas.push_back(draw_theta());
    for (const ParamVector& th : train_thetas) {
      State x = x0;
      for (const StageVector& z : sys.rollout(x0, th, horizon)) {
        data.append({{x, th, z}});
        x = z.head<kStateDim>();
      }
    }
    Matrix features = data.features();
    Matrix targets = data.targets();
    targets.leftCols<kStateDim>() -= features.leftCols<kStateDim>();
    std::vector<gp::ScaledGp> outs;
    for (int i = 0; i < kStageDim; ++i) {
      gp::GpPosterior post =
          gp::condition(kernel, gp::GpDataset(features, targets.col(i), 1e-10), 0.0);
      gp::ScaledGp g = gp::ScaledGp::wrap(std::move(post), 0.0);
      g.set_rkhs_bound(sys.residual[static_cast<std::size_t>(i)].norm);
      outs.push_back(std::move(g));
    }
    Box region = Box::bounding(features.transpose()).inflated(0.5);
    DynamicsModel model = DynamicsModel::assemble(gp::MultiOutputGp(std::move(outs), delta),
                                                  true, region, 1.0);
    model.set_lipschitz(estimate_gp_lipschitz(model, 256, region, 17 + s));

    // Probes: the training parameters' neighbourhoods and fresh draws.
    for (int p = 0; p < 4; ++p) {
      ParamVector th;
      if (p < 2) {
        Vector z = train_thetas[static_cast<std::size_t>(p)].log10();
        for (int i = 0; i < kParamDim; ++i) z[i] = std::clamp(z[i] + rng.uniform(-0.2, 0.2), -2.0, 2.0);
        th = ParamVector::from_log10(z);
      } else {
        th = draw_theta();
      }
      Rollout roll = rollout_mean(model, x0, th, horizon, true);
      std::vector<StageVector> truth = sys.rollout(x0, th, horizon);
      Matrix both(kStageDim, 2 * horizon);
      double j_true = 0.0;
      for (int k = 0; k < horizon; ++k) {
        const auto sk = static_cast<std::size_t>(k);
        const double err = (roll.stages[sk] - truth[sk]).norm();
        state_ok += err <= roll.radii[sk] ? 1 : 0;
        if (roll.radii[sk] > 0.0) tightness.push_back(err / roll.radii[sk]);
        ++state_total;
        both.col(k) = roll.stages[sk];
        both.col(horizon + k) = truth[sk];
        j_true += task.stage_cost(truth[sk]);
      }
      const double l_stage = estimate_stage_lipschitz(task, Box::bounding(both));
      const double chi = cost_bound(roll, l_stage);
      cost_ok += std::abs(surrogate_cost(roll, task) - j_true) <= chi ? 1 : 0;
      ++cost_total;
    }
  }
  const double state_rate = static_cast<double>(state_ok) / static_cast<double>(state_total);
  const double cost_rate = static_cast<double>(cost_ok) / static_cast<double>(cost_total);
  CriterionResult r{3, "multi-step bound", false, "", since(t0), 300.0};
  r.passed = state_rate >= 0.95 && cost_rate >= 0.95 && r.seconds < r.budget_seconds;
  r.detail = "|mu^k - f^k| <= nu^k rate " + num(state_rate) + " over " +
             std::to_string(state_total) + " probes, |Jhat - J| <= chi rate " + num(cost_rate) +
             " over " + std::to_string(cost_total) + " (need >= 0.95); median error/radius " +
             num(tightness.empty() ? 0.0 : harness::lower_median(tightness), 3);
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 4: nominal stabilization and adjoint gradient.

inline CriterionResult mpc_stabilization() {
  auto t0 = Clock::now();
  PlantConfig plant;
  OcpConfig ocp;
  const State x0 = (State() << 0.0, 0.0, 0.2, 0.0).finished();
  const ParamVector theta;
  Trajectory traj = run_episode(plant, ocp, theta, x0, 25, 0);
  const State& xf = traj.states.back();
  const bool stable = std::abs(xf[2]) < 0.05 && std::abs(xf[0]) < 1.0;

  // Central differences of the shooting objective at a generic input sequence.
  ShootingProblem prob(plant, ocp, x0, theta);
  Rng rng(404);
  Vector u(ocp.horizon);
  for (int i = 0; i < ocp.horizon; ++i) u[i] = rng.uniform(-2.0, 2.0);
  Vector grad;
  prob.objective_and_gradient(u, grad);
  double worst = 0.0;
  for (int i = 0; i < ocp.horizon; ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(u[i]));
    Vector up = u, um = u;
    up[i] += h;
    um[i] -= h;
    const double fd = (prob.objective(up) - prob.objective(um)) / (2.0 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(fd)));
  }
  CriterionResult r{4, "MPC stabilization", false, "", since(t0), 30.0};
  r.passed = stable && worst <= 1e-5 && r.seconds < r.budget_seconds;
  r.detail = "final |phi| " + num(std::abs(xf[2]), 3) + " rad, |p| " + num(std::abs(xf[0]), 3) +
             " m, gradient rel err " + num(worst, 3);
  return r;
}

// ---------------------------------------------------------------------------
// Criteria 5-10: the study.

struct StudyRun {
  harness::StudyResult result;
  harness::ExperimentConfig config;
  std::filesystem::path dir;
  double seconds = 0.0;
};

inline StudyRun run_logged_study(const harness::ExperimentConfig& cfg,
                                 const std::filesystem::path& dir, std::ostream* log) {
  auto t0 = Clock::now();
  StudyRun s;
  s.config = cfg;
  s.dir = dir;
  std::filesystem::remove_all(dir);
  s.result = harness::run_study(cfg, dir, log);
  s.seconds = since(t0);
  return s;
}

inline const bo::BoHistory* find_history(const harness::StudyResult& r, bo::Method m,
                                         const std::string& task, std::uint64_t seed) {
  for (const auto& run : r.runs) {
    for (const auto& h : run.histories) {
      if (h.method == m && h.task == task && h.seed == seed) return &h;
    }
  }
  return nullptr;
}

/// Wall time of the given method's histories on `task` (all tasks if empty).
inline double history_seconds(const harness::StudyResult& r, bo::Method m,
                              const std::string& task = "") {
  double total = 0.0;
  for (const auto& run : r.runs) {
    for (const auto& h : run.histories) {
      if (h.method != m || (!task.empty() && h.task != task)) continue;
      for (const auto& rec : h.records) total += rec.wall_seconds;
    }
  }
  return total;
}

struct PairedComparison {
  double win_rate = 0.0;  // ties count one half
  double median_a = 0.0, median_b = 0.0;
  int pairs = 0;
};

inline PairedComparison compare_at(const harness::StudyResult& r, bo::Method a, bo::Method b,
                                   const std::string& task, int iteration) {
  PairedComparison c;
  std::vector<double> va, vb;
  double wins = 0.0;
  for (const auto& run : r.runs) {
    if (run.unit.method != a) continue;
    const bo::BoHistory* ha = find_history(r, a, task, run.unit.seed);
    const bo::BoHistory* hb = find_history(r, b, task, run.unit.seed);
    if (!ha || !hb || static_cast<int>(ha->size()) < iteration ||
        static_cast<int>(hb->size()) < iteration) {
      continue;
    }
    const double x = ha->records[static_cast<std::size_t>(iteration - 1)].best_so_far;
    const double y = hb->records[static_cast<std::size_t>(iteration - 1)].best_so_far;
    va.push_back(x);
    vb.push_back(y);
    wins += x < y ? 1.0 : (x == y ? 0.5 : 0.0);
    ++c.pairs;
  }
  if (c.pairs > 0) {
    c.win_rate = wins / c.pairs;
    c.median_a = harness::lower_median(va);
    c.median_b = harness::lower_median(vb);
  }
  return c;
}

inline CriterionResult single_task_parity(const StudyRun& s) {
  const auto& agg = s.result.aggregate;
  const std::string task = s.config.tasks.front().label;
  const auto* h = agg.find(bo::Method::kHierarchical, task);
  const auto* b = agg.find(bo::Method::kBlackbox, task);
  CriterionResult r{5, "single-task parity", false, "", 0.0, 1200.0};
  r.seconds = history_seconds(s.result, bo::Method::kHierarchical, task) +
              history_seconds(s.result, bo::Method::kBlackbox, task);
  if (!h || !b) {
    r.detail = "missing aggregate series";
    return r;
  }
  const double hb = h->best.mean.back(), bb = b->best.mean.back();
  r.passed = hb <= bb && r.seconds < r.budget_seconds;
  r.detail = "mean best-so-far at T=" + std::to_string(h->length()) + ": hierarchical " +
             num(hb, 6) + " vs blackbox " + num(bb, 6) + " over " +
             std::to_string(h->seeds.size()) + " seeds";
  return r;
}

inline CriterionResult transfer(const StudyRun& s) {
  const std::string task = s.config.tasks.at(1).label;
  auto hbo = compare_at(s.result, bo::Method::kHierarchical, bo::Method::kBlackbox, task, 5);
  auto mt = compare_at(s.result, bo::Method::kMultitask, bo::Method::kBlackbox, task, 5);
  auto hm = compare_at(s.result, bo::Method::kHierarchical, bo::Method::kMultitask, task, 5);
  CriterionResult r{6, "transfer", false, "", s.seconds, 2400.0};
  const bool order = hm.median_a <= hm.median_b && mt.median_a <= mt.median_b;
  r.passed = hbo.win_rate >= 0.7 && mt.win_rate >= 0.5 && order && hbo.pairs > 0 &&
             mt.pairs > 0 && r.seconds < r.budget_seconds;
  r.detail = task + " iteration 5: hierarchical win rate vs blackbox " + num(hbo.win_rate, 3) +
             " over " + std::to_string(hbo.pairs) + " seeds (need 0.7), multitask " +
             num(mt.win_rate, 3) + " (need 0.5); medians hbo " + num(hbo.median_a, 6) +
             ", multitask " + num(mt.median_a, 6) + ", blackbox " + num(hbo.median_b, 6);
  return r;
}

inline CriterionResult noisy_transfer(const StudyRun& s) {
  const std::string task = s.config.tasks.at(1).label;
  auto hbo = compare_at(s.result, bo::Method::kHierarchical, bo::Method::kBlackbox, task, 5);
  CriterionResult r{7, "noisy transfer", false, "", s.seconds, 2400.0};
  r.passed = hbo.win_rate >= 0.7 && hbo.median_a <= hbo.median_b && hbo.pairs > 0 &&
             r.seconds < r.budget_seconds;
  r.detail = task + " iteration 5 with noise: hierarchical win rate vs blackbox " +
             num(hbo.win_rate, 3) + " over " + std::to_string(hbo.pairs) +
             " seeds (need 0.7); medians hbo " + num(hbo.median_a, 6) + ", blackbox " +
             num(hbo.median_b, 6);
  return r;
}

inline CriterionResult sublinearity(const StudyRun& s) {
  auto t0 = Clock::now();
  // Recompute from the stored histories.
  harness::AggregateResult agg = harness::aggregate(harness::read_histories(s.dir), 10);
  const std::string task = s.config.tasks.front().label;
  const auto* h = agg.find(bo::Method::kHierarchical, task);
  const auto* b = agg.find(bo::Method::kBlackbox, task);
  CriterionResult r{8, "sublinearity", false, "", 0.0, 300.0};
  if (!h || !b || h->length() < 11) {
    r.detail = "missing or short series";
    r.seconds = since(t0);
    return r;
  }
  const double slope = h->slope;
  const double ch = h->cumulative.mean.back(), cb = b->cumulative.mean.back();
  r.seconds = since(t0);
  r.passed = slope < 1.0 && ch < cb && r.seconds < r.budget_seconds;
  r.detail = task + ": log-log slope of mean cumulative cost over t in [10, " +
             std::to_string(h->length()) + "] = " + num(slope, 4) +
             "; cumulative at T: hierarchical " + num(ch, 6) + " vs blackbox " + num(cb, 6);
  return r;
}

inline CriterionResult determinism(const StudyRun& first, const StudyRun& second) {
  CriterionResult r{9, "determinism", false, "", second.seconds, 0.0};
  const auto& a = first.result.manifest.entries();
  const auto& b = second.result.manifest.entries();
  int compared = 0, differing = 0;
  for (const auto& [k, v] : a) {
    if (k.rfind("file.aggregate/", 0) != 0) continue;
    ++compared;
    auto it = b.find(k);
    if (it == b.end() || it->second != v) ++differing;
  }
  bool bytes_equal = true;
  for (const auto& [k, v] : a) {
    if (k.rfind("file.aggregate/", 0) != 0) continue;
    const std::string rel = k.substr(5);
    if (harness::read_file(first.dir / rel) != harness::read_file(second.dir / rel)) {
      bytes_equal = false;
    }
  }
  const bool manifest_equal = first.result.manifest.text() == second.result.manifest.text();
  r.passed = compared > 0 && differing == 0 && bytes_equal && manifest_equal;
  r.detail = std::to_string(compared) + " aggregate files compared, " +
             std::to_string(differing) + " checksum mismatches; manifests " +
             (manifest_equal ? "identical" : "differ");
  return r;
}

inline CriterionResult data_volume(const StudyRun& s) {
  CriterionResult r{10, "data volume", false, "", 0.0, 0.0};
  const std::string task = s.config.tasks.front().label;
  const int t_budget = s.config.budget_for(0);
  const std::size_t expected = static_cast<std::size_t>(t_budget) * s.config.steps;
  int checked = 0, matched = 0;
  for (const auto& run : s.result.runs) {
    if (run.unit.method != bo::Method::kHierarchical || run.failed()) continue;
    const bo::BoHistory& h = run.histories.front();
    bool aborted = false;
    for (const auto& rec : h.records) aborted = aborted || rec.aborted;
    if (aborted) continue;
    ++checked;
    matched += h.records.back().transitions == expected ? 1 : 0;
  }
  r.passed = checked > 0 && matched == checked;
  r.detail = std::to_string(matched) + " of " + std::to_string(checked) +
             " abort-free runs hold exactly T*K = " + std::to_string(expected) +
             " transitions after " + task;
  return r;
}

struct SuiteOptions {
  bool studies = true;
  std::size_t seeds = 30;
  int budget = 50;
  std::filesystem::path work_dir = "acceptance_out";
  int workers = 1;
  std::ostream* log = &std::cerr;
};

inline harness::ExperimentConfig study_config(const SuiteOptions& o, bool noisy) {
  harness::ExperimentConfig cfg;
  cfg.seeds.clear();
  for (std::uint64_t s = 0; s < o.seeds; ++s) cfg.seeds.push_back(s);
  cfg.budget = o.budget;
  cfg.workers = o.workers;
  cfg.noise = noisy;
  if (noisy) {
    // Only iteration 5 of the second task is compared.
    cfg.methods = {bo::Method::kBlackbox, bo::Method::kHierarchical};
    cfg.task_budgets = {o.budget, 5};
  }
  return cfg;
}

/// Runs the criteria in order, printing one line per criterion as it
/// completes. Returns all results.
inline std::vector<CriterionResult> run_suite(const SuiteOptions& o, std::ostream& out) {
  std::vector<CriterionResult> results;
  auto report = [&](CriterionResult r) {
    out << r.line() << std::endl;
    results.push_back(std::move(r));
  };
  report(gp_exactness());
  report(calibration_coverage());
  report(multistep_bound());
  report(mpc_stabilization());
  if (!o.studies) return results;

  StudyRun clean = run_logged_study(study_config(o, false), o.work_dir / "noise_free", o.log);
  report(single_task_parity(clean));
  report(transfer(clean));
  StudyRun noisy = run_logged_study(study_config(o, true), o.work_dir / "noisy", o.log);
  report(noisy_transfer(noisy));
  report(sublinearity(clean));
  StudyRun rerun = run_logged_study(study_config(o, false), o.work_dir / "noise_free_rerun", o.log);
  report(determinism(clean, rerun));
  report(data_volume(clean));
  return results;
}

}  // namespace hbo::acceptance
