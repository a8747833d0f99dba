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

#include <cmath>

#include <gtest/gtest.h>

#include "hbo/bo/optimizers.hpp"

namespace hbo::bo {
namespace {

// J = 1 + (log10 q1 - 0.5)^2; the other weights do not matter.
EpisodeRunner quadratic_runner() {
  return [](const ParamVector& theta, const Task&, std::uint64_t) {
    EpisodeOutcome out;
    const double z = std::log10(theta[0]) - 0.5;
    out.cost = 1.0 + z * z;
    return out;
  };
}

EpisodeRunner cartpole_runner(const BoConfig& cfg) {
  return plant_runner(PlantConfig{}, OcpConfig{}, cfg.initial_state, cfg.episode_steps);
}

TEST(Acquisition, LcbExample) {
  EXPECT_DOUBLE_EQ(lcb(gp::Prediction{1.0, 4.0}, 2.0), -3.0);
  EXPECT_DOUBLE_EQ(lcb(gp::Prediction{1.0, 4.0}, 0.0), 1.0);
  EXPECT_THROW(lcb(gp::Prediction{1.0, 4.0}, -1.0), InvalidArgument);
}

TEST(Acquisition, ExpectedImprovementExamples) {
  EXPECT_NEAR(expected_improvement(gp::Prediction{0.0, 1.0}, 0.0), 0.398942, 1e-6);
  EXPECT_DOUBLE_EQ(expected_improvement(gp::Prediction{0.0, 0.0}, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(expected_improvement(gp::Prediction{1.0, 0.0}, 0.0), 0.0);
  EXPECT_GE(expected_improvement(gp::Prediction{50.0, 1.0}, 0.0), 0.0);
}

TEST(Acquisition, HaltonLiesInUnitCube) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    Vector p = halton_point(i, 5);
    EXPECT_TRUE((p.array() >= 0.0).all() && (p.array() < 1.0).all());
  }
  EXPECT_DOUBLE_EQ(halton_point(1, 2)[0], 0.5);
}

TEST(Acquisition, FindsQuadraticMinimum) {
  Box box{Vector::Constant(5, -2.0), Vector::Constant(5, 2.0)};
  Vector c(5);
  c << 0.3, -1.1, 1.7, 0.0, -0.4;
  auto f = [&](const Vector& z) { return (z - c).squaredNorm(); };
  Rng rng(1);
  AcquisitionSettings s;
  s.local_steps = 200;
  AcquisitionResult r = optimize_acquisition(f, box, s, rng);
  EXPECT_LT((r.point - c).norm(), 1e-3);
  EXPECT_FALSE(r.flat);
}

TEST(Acquisition, FlatSurfaceIsFlagged) {
  Box box{Vector::Constant(3, -1.0), Vector::Constant(3, 1.0)};
  Rng rng(2);
  AcquisitionResult r = optimize_acquisition([](const Vector&) { return 4.0; }, box,
                                             AcquisitionSettings{}, rng);
  EXPECT_TRUE(r.flat);
  EXPECT_EQ(r.value, 4.0);
  EXPECT_TRUE((r.point.array() >= -1.0).all() && (r.point.array() <= 1.0).all());
}

TEST(Acquisition, MoreProbesNeverWorse) {
  Box box{Vector::Constant(2, -1.0), Vector::Constant(2, 1.0)};
  auto f = [](const Vector& z) { return std::sin(5 * z[0]) * std::cos(3 * z[1]) + z[0]; };
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {4, 16, 64, 256}) {
    AcquisitionSettings s;
    s.restarts = n;
    s.local_steps = 0;
    Rng rng(9);
    double v = optimize_acquisition(f, box, s, rng).value;
    EXPECT_LE(v, prev);
    prev = v;
  }
}

TEST(Optimizers, SingleIterationEvaluatesInitialTheta) {
  const Task task = Task::task1();
  for (Method m : {Method::kBlackbox, Method::kMultitask, Method::kHierarchical}) {
    BoConfig cfg = BoConfig::for_method(m);
    cfg.budget = 1;
    std::vector<BoHistory> hs;
    if (m == Method::kBlackbox) {
      hs.push_back(run_blackbox(cfg, task, 0, cartpole_runner(cfg)));
    } else if (m == Method::kMultitask) {
      hs = run_multitask(cfg, {task}, cartpole_runner(cfg));
    } else {
      hs = run_hierarchical(cfg, {task}, cartpole_runner(cfg)).histories;
    }
    ASSERT_EQ(hs.size(), 1u);
    ASSERT_EQ(hs[0].size(), 1u);
    EXPECT_EQ(hs[0].records[0].theta.values(), cfg.initial_theta.values());
    EXPECT_EQ(hs[0].records[0].best_so_far, hs[0].records[0].cost);
    EXPECT_EQ(hs[0].records[0].cumulative, hs[0].records[0].cost);
  }
}

TEST(Optimizers, BlackboxIsDeterministic) {
  BoConfig cfg = BoConfig::for_method(Method::kBlackbox);
  cfg.budget = 8;
  cfg.seed = 4;
  BoHistory a = run_blackbox(cfg, Task::task1(), 0, quadratic_runner());
  BoHistory b = run_blackbox(cfg, Task::task1(), 0, quadratic_runner());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.records[i].theta.values(), b.records[i].theta.values());
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
  }
}

TEST(Optimizers, BlackboxSolvesSyntheticQuadratic) {
  BoConfig cfg = BoConfig::for_method(Method::kBlackbox);
  cfg.budget = 20;
  BoHistory h = run_blackbox(cfg, Task::task1(), 0, quadratic_runner());
  EXPECT_LE(h.best(), 1.05);
  for (std::size_t i = 1; i < h.size(); ++i) {
    EXPECT_LE(h.records[i].best_so_far, h.records[i - 1].best_so_far);
    EXPECT_NEAR(h.records[i].cumulative, h.records[i - 1].cumulative + h.records[i].cost, 1e-12);
  }
}

TEST(Optimizers, RecordedCostIsReproducible) {
  BoConfig cfg = BoConfig::for_method(Method::kBlackbox);
  cfg.budget = 3;
  cfg.seed = 2;
  PlantConfig noisy = PlantConfig::with_noise_std(0.01);
  EpisodeRunner runner = plant_runner(noisy, OcpConfig{}, cfg.initial_state, cfg.episode_steps);
  BoHistory h = run_blackbox(cfg, Task::task2(), 1, runner);
  for (const IterationRecord& rec : h.records) {
    EXPECT_EQ(runner(rec.theta, Task::task2(), rec.seed).cost, rec.cost);
  }
  EXPECT_EQ(h.records[1].seed, episode_seed(2, 1, 2));
}

TEST(Optimizers, InvalidConfigRejected) {
  BoConfig cfg = BoConfig::for_method(Method::kBlackbox);
  cfg.budget = 0;
  EXPECT_THROW(run_blackbox(cfg, Task::task1(), 0, quadratic_runner()), InvalidArgument);
  BoConfig mismatched = BoConfig::for_method(Method::kHierarchical);
  mismatched.acquisition = Acquisition::kEi;
  EXPECT_THROW(mismatched.validate(), InvalidArgument);
}

TEST(Icm, IdenticalTasksAreCorrelated) {
  TaskObservations obs;
  obs.num_tasks = 2;
  Rng rng(5);
  for (int i = 0; i < 12; ++i) {
    Vector x(2);
    x << rng.uniform(-1, 1), rng.uniform(-1, 1);
    const double y = std::sin(2 * x[0]) + x[1] * x[1];
    obs.add(x, 0, y);
    obs.add(x, 1, y);
  }
  IcmGp m = IcmGp::fit(obs, IcmOptions{});
  EXPECT_GE(m.task_correlation(0, 1), 0.8);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m.task_covariance());
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);

  IcmGp same = IcmGp::with_params(obs, IcmOptions{}, m.params());
  Vector q = Vector::Constant(2, 0.25);
  EXPECT_NEAR(same.predict(q, 1).mean, m.predict(q, 1).mean, 1e-10);
}

TEST(Icm, SecondTaskBenefitsFromFirst) {
  // Task 1 is fully observed; task 0 only on the left half. The shared
  // model should extrapolate the task-0 trend to the right.
  TaskObservations obs;
  obs.num_tasks = 2;
  for (int i = 0; i < 15; ++i) {
    Vector x = Vector::Constant(1, -1.0 + 2.0 * i / 14.0);
    obs.add(x, 1, 3.0 * x[0]);
  }
  obs.add(Vector::Constant(1, -1.0), 0, -3.0);
  obs.add(Vector::Constant(1, -0.5), 0, -1.5);
  IcmGp m = IcmGp::fit(obs, IcmOptions{});
  EXPECT_NEAR(m.predict(Vector::Constant(1, 0.8), 0).mean, 2.4, 0.5);
}

TEST(Optimizers, MultitaskSingleTaskRuns) {
  BoConfig cfg = BoConfig::for_method(Method::kMultitask);
  cfg.budget = 6;
  std::vector<BoHistory> hs = run_multitask(cfg, {Task::task1()}, quadratic_runner());
  ASSERT_EQ(hs.size(), 1u);
  EXPECT_EQ(hs[0].size(), 6u);
  EXPECT_LE(hs[0].best(), hs[0].records[0].cost);
}

TEST(Optimizers, HierarchicalSharesTransitionsAcrossTasks) {
  BoConfig cfg = BoConfig::for_method(Method::kHierarchical);
  cfg.budget = 2;
  HierarchicalResult r =
      run_hierarchical(cfg, {Task::task1(), Task::task2()}, cartpole_runner(cfg));
  ASSERT_EQ(r.histories.size(), 2u);
  EXPECT_EQ(r.histories[0].records.back().transitions, 50u);
  EXPECT_EQ(r.histories[1].records.front().transitions, 75u);
  EXPECT_EQ(r.transitions.size(), 100u);
  EXPECT_TRUE(std::isfinite(r.histories[1].records.front().surrogate_cost));
  EXPECT_TRUE(std::isfinite(r.histories[1].records.front().bound));
}

TEST(Regret, Accounting) {
  BoHistory h;
  for (double c : {3.0, 1.0, 2.0}) {
    IterationRecord r;
    r.cost = c;
    h.push(r);
  }
  RegretSeries s = regret_accounting(h, 1.0);
  EXPECT_EQ(s.simple_regret, (std::vector<double>{2.0, 0.0, 0.0}));
  EXPECT_EQ(s.cumulative_regret, (std::vector<double>{2.0, 2.0, 3.0}));
  EXPECT_EQ(s.cumulative_cost, (std::vector<double>{3.0, 4.0, 6.0}));
}

TEST(Regret, PowerLawSlope) {
  std::vector<double> y;
  for (int t = 1; t <= 50; ++t) y.push_back(4.0 * std::sqrt(t));
  EXPECT_NEAR(power_law_slope(y, 1, 50), 0.5, 1e-12);
  EXPECT_THROW(power_law_slope(y, 3, 3), InvalidArgument);
}

}  // namespace
}  // namespace hbo::bo
