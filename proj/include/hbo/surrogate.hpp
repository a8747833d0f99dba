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
#include <optional>
#include <string>
#include <vector>

#include "hbo/closed_loop.hpp"
#include "hbo/core.hpp"
#include "hbo/gp/multi_output.hpp"
#include "hbo/mpc.hpp"
#include "hbo/random.hpp"

namespace hbo {

struct DynamicsSettings {
  // Refits are warm-started from the previous model, so few restarts suffice.
  gp::ScaledGpOptions gp = [] {
    gp::ScaledGpOptions o;
    o.max_fit_points = 150;
    o.fit.restarts = 2;
    o.fit.ascent.max_iterations = 50;
    return o;
  }();
  // Raw observation-noise variance per output z = (x+, u).
  StageVector noise_variance = StageVector::Zero();
  // Episode-level confidence; split across the M outputs for each step.
  double delta = 0.05 / 25.0;
  int lipschitz_samples = 128;
  double lipschitz_floor = 1e-6;
  double lipschitz_inflation = 1.5;
  // Relative growth of the training-input bounding box used as the
  // Lipschitz sampling region.
  double region_inflation = 0.2;
  // Conditioning-set cap (0: every row). Above it, the newest quarter of the
  // cap is kept whole and the older rows are strided.
  std::size_t max_condition_rows = 400;
  // Learn x+ - x instead of x+ (zero-mean prior on the state increment).
  bool residual_targets = true;
  std::uint64_t seed = 0x4c495053ULL;
};

/// Row indices used to condition the dynamics GP.
inline std::vector<std::size_t> conditioning_rows(std::size_t total,
                                                  std::size_t cap) {
  std::vector<std::size_t> idx;
  if (cap == 0 || total <= cap) {
    idx.resize(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    return idx;
  }
  const std::size_t recent = cap / 4;
  const std::size_t older = total - recent;
  const std::size_t picks = cap - recent;
  for (std::size_t i = 0; i < picks; ++i) {
    idx.push_back(static_cast<std::size_t>(
        (static_cast<double>(i) + 0.5) * static_cast<double>(older) /
        static_cast<double>(picks)));
  }
  for (std::size_t i = older; i < total; ++i) idx.push_back(i);
  return idx;
}

/// Multi-output GP model of (x_k, log10 theta) -> z_{k+1}, with features
/// standardized per dimension using statistics of the training set.
class DynamicsModel {
 public:
  DynamicsModel() = default;

  const gp::MultiOutputGp& gp() const { return gp_; }
  double lipschitz() const { return lipschitz_; }
  double delta() const { return gp_.delta(); }
  // Rows the GP is conditioned on.
  std::size_t training_rows() const { return rows_; }
  const Box& input_region() const { return region_; }
  const FeatureVector& feature_mean() const { return mean_; }
  const FeatureVector& feature_scale() const { return scale_; }

  std::vector<gp::KernelSpec> kernels() const {
    std::vector<gp::KernelSpec> k;
    for (int i = 0; i < gp_.size(); ++i) k.push_back(gp_.output(i).kernel());
    return k;
  }

  static FeatureVector raw_feature(const State& x, const ParamVector& theta) {
    FeatureVector f;
    f << x, theta.log10();
    return f;
  }

  FeatureVector standardize(const FeatureVector& raw) const {
    return ((raw - mean_).array() / scale_.array()).matrix();
  }

  StageVector predict_mean(const FeatureVector& raw) const {
    FeatureVector s = standardize(raw);
    StageVector out;
    for (int i = 0; i < kStageDim; ++i) {
      out[i] = gp_.output(i).predict_mean_unchecked(s);
    }
    if (residual_) out.head<kStateDim>() += raw.head<kStateDim>();
    return out;
  }

  gp::VectorPrediction predict(const FeatureVector& raw) const {
    gp::VectorPrediction p = gp_.predict_vector(Vector(standardize(raw)));
    if (residual_) p.mean.head(kStateDim) += raw.head<kStateDim>();
    return p;
  }

  bool residual() const { return residual_; }

  void set_lipschitz(double l) { lipschitz_ = l; }

  /// A model from already conditioned per-output GPs whose inputs are raw
  /// features (no standardization).
  static DynamicsModel assemble(gp::MultiOutputGp outputs, bool residual,
                                Box region, double lipschitz) {
    require(outputs.size() == kStageDim && outputs.input_dim() == kFeatureDim,
            "DynamicsModel::assemble: need 5 outputs over 9 inputs");
    DynamicsModel m;
    m.rows_ = static_cast<std::size_t>(outputs.output(0).posterior().size());
    m.gp_ = std::move(outputs);
    m.residual_ = residual;
    m.region_ = std::move(region);
    m.lipschitz_ = lipschitz;
    return m;
  }

  friend DynamicsModel train_dynamics(const TransitionSet&,
                                      const DynamicsSettings&, bool,
                                      const DynamicsModel*);
  friend DynamicsModel untrained_dynamics(const DynamicsSettings&);

 private:
  gp::MultiOutputGp gp_;
  FeatureVector mean_ = FeatureVector::Zero();
  FeatureVector scale_ = FeatureVector::Ones();
  Box region_;
  double lipschitz_ = 1e-6;
  std::size_t rows_ = 0;
  bool residual_ = false;
};

inline double estimate_gp_lipschitz(const DynamicsModel& model, int samples,
                                    const Box& region,
                                    std::uint64_t seed = 0x4c4950ULL,
                                    double inflation = 1.5,
                                    double floor = 1e-6);

/// Prior model (no data): zero mean, unit-kernel outputs.
inline DynamicsModel untrained_dynamics(const DynamicsSettings& settings) {
  DynamicsModel m;
  std::vector<gp::ScaledGp> outs;
  for (int i = 0; i < kStageDim; ++i) {
    outs.push_back(gp::ScaledGp::train(
        Matrix(0, kFeatureDim), Vector(0), settings.noise_variance[i],
        settings.gp, std::nullopt));
  }
  m.gp_ = gp::MultiOutputGp(std::move(outs), settings.delta);
  m.region_ = {Vector::Zero(kFeatureDim), Vector::Zero(kFeatureDim)};
  m.residual_ = settings.residual_targets;
  m.lipschitz_ = settings.lipschitz_floor;
  return m;
}

/// Conditions one GP per output of z on every transition row. With
/// `refit_hypers` off, hyperparameters are carried over from `previous`
/// (unit kernels when there is none).
inline DynamicsModel train_dynamics(const TransitionSet& data,
                                    const DynamicsSettings& settings,
                                    bool refit_hypers,
                                    const DynamicsModel* previous = nullptr) {
  require(!data.empty(), "train_dynamics: need at least one transition");
  DynamicsModel m;
  std::vector<std::size_t> keep =
      conditioning_rows(data.size(), settings.max_condition_rows);
  m.rows_ = keep.size();
  Matrix all_features = data.features();
  Matrix all_targets = data.targets();
  Matrix raw(static_cast<Eigen::Index>(keep.size()), kFeatureDim);
  Matrix targets(static_cast<Eigen::Index>(keep.size()), kStageDim);
  for (std::size_t i = 0; i < keep.size(); ++i) {
    raw.row(static_cast<Eigen::Index>(i)) = all_features.row(static_cast<Eigen::Index>(keep[i]));
    targets.row(static_cast<Eigen::Index>(i)) = all_targets.row(static_cast<Eigen::Index>(keep[i]));
  }
  m.residual_ = settings.residual_targets;
  if (m.residual_) targets.leftCols<kStateDim>() -= raw.leftCols<kStateDim>();
  const double n = static_cast<double>(raw.rows());
  m.mean_ = raw.colwise().mean().transpose();
  for (int j = 0; j < kFeatureDim; ++j) {
    double sd = std::sqrt((raw.col(j).array() - m.mean_[j]).square().sum() / n);
    m.scale_[j] = sd > 1e-9 ? sd : 1.0;
  }
  Matrix x = (raw.rowwise() - m.mean_.transpose()).array().rowwise() /
             m.scale_.transpose().array();

  gp::ScaledGpOptions opts = settings.gp;
  opts.refit = refit_hypers;
  std::vector<gp::ScaledGp> outs;
  outs.reserve(kStageDim);
  for (int i = 0; i < kStageDim; ++i) {
    std::optional<gp::KernelSpec> prev;
    if (previous && previous->gp().size() == kStageDim) {
      prev = previous->gp().output(i).kernel();
    }
    opts.fit.seed = settings.seed + 7919ULL * static_cast<std::uint64_t>(i);
    outs.push_back(gp::ScaledGp::train(x, targets.col(i),
                                       settings.noise_variance[i], opts, prev));
  }
  m.gp_ = gp::MultiOutputGp(std::move(outs), settings.delta);
  m.region_ = Box::bounding(raw.transpose()).inflated(settings.region_inflation);
  m.lipschitz_ = estimate_gp_lipschitz(
      m, settings.lipschitz_samples, m.region_, settings.seed,
      settings.lipschitz_inflation, settings.lipschitz_floor);
  return m;
}

/// Max of |mu(a) - mu(b)| / |a - b| over sampled pairs in `region` (raw
/// feature coordinates), times `inflation` and no smaller than `floor`.
/// Half the pairs are local (short random displacements), half are
/// independent uniform draws.
inline double estimate_gp_lipschitz(const DynamicsModel& model, int samples,
                                    const Box& region, std::uint64_t seed,
                                    double inflation, double floor) {
  require(samples >= 2, "estimate_gp_lipschitz: need at least two samples");
  require(region.dim() == kFeatureDim && region.bounded(),
          "estimate_gp_lipschitz: region must be a bounded 9-D box");
  Vector width = region.upper - region.lower;
  require(width.maxCoeff() > 0.0, "estimate_gp_lipschitz: degenerate region");
  Rng rng(seed);
  auto draw = [&] {
    FeatureVector p;
    for (int j = 0; j < kFeatureDim; ++j) {
      p[j] = region.lower[j] + width[j] * rng.uniform();
    }
    return p;
  };
  const double local = 1e-3 * width.norm();
  double best = 0.0;
  for (int s = 0; s < samples; ++s) {
    FeatureVector a = draw();
    FeatureVector b;
    if (s % 2 == 0) {
      FeatureVector dir;
      for (int j = 0; j < kFeatureDim; ++j) {
        dir[j] = width[j] > 0.0 ? rng.normal() : 0.0;
      }
      if (dir.norm() == 0.0) continue;
      b = a + local * dir.normalized();
    } else {
      b = draw();
    }
    double dist = (a - b).norm();
    if (dist <= 0.0) continue;
    double ratio = (model.predict_mean(a) - model.predict_mean(b)).norm() / dist;
    if (std::isfinite(ratio)) best = std::max(best, ratio);
  }
  return std::max(floor, inflation * best);
}

/// Mean rollout z_1..z_K with the propagated error radii nu^k.
struct Rollout {
  std::vector<StageVector> stages;
  std::vector<double> radii;      // nu^1..nu^K (empty without bounds)
  std::vector<double> eps_norms;  // |eps(x_hat_{k-1}, theta)| per step
  bool has_bounds() const { return !radii.empty(); }
};

/// z_1 = mu(x0, theta), z_{k+1} = mu(z_k|x, theta). With `bounds`,
/// nu^1 = |eps(x0)|, nu^{k+1} = |eps(z_k|x)| + L_GP nu^k.
inline Rollout rollout_mean(const DynamicsModel& model, const State& x0,
                            const ParamVector& theta, std::size_t steps,
                            bool bounds = true) {
  Rollout r;
  r.stages.reserve(steps);
  FeatureVector f = DynamicsModel::raw_feature(x0, theta);
  double nu = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    StageVector z;
    if (bounds) {
      gp::VectorPrediction p = model.predict(f);
      z = p.mean;
      double e = p.eps.norm();
      nu = e + (k == 0 ? 0.0 : model.lipschitz() * nu);
      r.eps_norms.push_back(e);
      r.radii.push_back(nu);
    } else {
      z = model.predict_mean(f);
    }
    if (!z.allFinite() || (bounds && !std::isfinite(nu))) {
      throw NumericalFailure("rollout_mean: non-finite prediction at step " +
                             std::to_string(k + 1));
    }
    r.stages.push_back(z);
    f.head<kStateDim>() = z.head<kStateDim>();
  }
  return r;
}

/// J_hat(theta) = sum_k l(z_k).
inline double surrogate_cost(const Rollout& roll, const Task& task) {
  double total = 0.0;
  for (const StageVector& z : roll.stages) total += task.stage_cost(z);
  return total;
}

/// chi = L_l * sum_k nu^k.
inline double cost_bound(const Rollout& roll, double stage_lipschitz) {
  require(roll.has_bounds(), "cost_bound: rollout carries no error radii");
  require(stage_lipschitz >= 0.0, "cost_bound: negative Lipschitz constant");
  double sum = 0.0;
  for (double nu : roll.radii) sum += nu;
  return stage_lipschitz * sum;
}

/// The rollout viewed as a trajectory from x0 (for shared cost code).
inline Trajectory rollout_as_trajectory(const Rollout& roll, const State& x0,
                                        const ParamVector& theta) {
  Trajectory t;
  t.initial_state = x0;
  t.theta = theta;
  for (const StageVector& z : roll.stages) {
    t.states.push_back(z.head<kStateDim>());
    t.inputs.push_back(z[kStateDim]);
  }
  return t;
}

/// Bounding box of observed z, grown by `inflation`, for the stage-cost
/// Lipschitz estimate.
inline Box stage_region(const TransitionSet& data, double inflation = 0.2) {
  require(!data.empty(), "stage_region: no transitions");
  return Box::bounding(data.targets().transpose()).inflated(inflation);
}

}  // namespace hbo
