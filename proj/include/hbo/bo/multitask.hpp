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
#include <vector>

#include "hbo/core.hpp"
#include "hbo/gp/evidence.hpp"
#include "hbo/gp/kernel.hpp"
#include "hbo/gp/posterior.hpp"
#include "hbo/random.hpp"

namespace hbo::bo {

/// Observations of several related objectives over a shared input space.
struct TaskObservations {
  Matrix inputs;                // n x d
  std::vector<int> task;        // n task indices in [0, num_tasks)
  Vector outputs;               // n
  int num_tasks = 1;

  Eigen::Index size() const { return outputs.size(); }

  void add(const Vector& x, int t, double y) {
    require(t >= 0 && t < num_tasks, "TaskObservations: task index out of range");
    if (inputs.cols() == 0) inputs.resize(0, x.size());
    require(x.size() == inputs.cols(), "TaskObservations: input dimension");
    inputs.conservativeResize(inputs.rows() + 1, Eigen::NoChange);
    inputs.row(inputs.rows() - 1) = x.transpose();
    outputs.conservativeResize(outputs.size() + 1);
    outputs[outputs.size() - 1] = y;
    task.push_back(t);
  }
};

struct IcmOptions {
  int restarts = 8;
  double nugget = 1e-6;  // standardized noise floor
  double noise_max = 1.0;
  gp::KernelKind kind = gp::KernelKind::kSquaredExponential;
  gp::AscentOptions ascent;
  std::uint64_t seed = 0x1c3ULL;
};

/// Intrinsic coregionalization model: k((a, i), (b, j)) = B_ij k_x(a, b),
/// with k_x a unit-variance ARD kernel and B = L L' a free-form task
/// covariance. Outputs are standardized per task. Hyperparameters are fit by
/// evidence maximization over
///   [log ell_1..d, log L_ii (i < T), L_ij (i > j), log noise].
class IcmGp {
 public:
  IcmGp() = default;

  static IcmGp fit(const TaskObservations& obs, const IcmOptions& options,
                   const std::optional<Vector>& warm_start = {}) {
    require(obs.size() >= 1, "IcmGp: need at least one observation");
    IcmGp m;
    m.num_tasks_ = obs.num_tasks;
    m.dim_ = static_cast<int>(obs.inputs.cols());
    m.kind_ = options.kind;
    m.inputs_ = obs.inputs;
    m.task_ = obs.task;
    m.standardize(obs);
    m.params_ = m.optimize(options, warm_start);
    m.condition(options);
    return m;
  }

  /// Conditions on `obs` with fixed hyperparameters (no evidence ascent).
  static IcmGp with_params(const TaskObservations& obs, const IcmOptions& options,
                           const Vector& params) {
    require(obs.size() >= 1, "IcmGp: need at least one observation");
    IcmGp m;
    m.num_tasks_ = obs.num_tasks;
    m.dim_ = static_cast<int>(obs.inputs.cols());
    m.kind_ = options.kind;
    m.inputs_ = obs.inputs;
    m.task_ = obs.task;
    require(params.size() == m.num_params(), "IcmGp::with_params: wrong parameter count");
    m.standardize(obs);
    m.params_ = m.bounds(options).clamp(params);
    m.condition(options);
    return m;
  }

  int num_tasks() const { return num_tasks_; }
  const Vector& params() const { return params_; }
  double noise_variance() const { return noise_; }
  const Vector& lengthscales() const { return lengthscales_; }

  /// B = L L'.
  const Matrix& task_covariance() const { return task_cov_; }

  double task_correlation(int a, int b) const {
    return task_cov_(a, b) / std::sqrt(task_cov_(a, a) * task_cov_(b, b));
  }

  /// Posterior of task t at x, raw output units.
  gp::Prediction predict(const Vector& x, int t) const {
    require(t >= 0 && t < num_tasks_, "IcmGp::predict: task out of range");
    require(x.size() == dim_ && x.allFinite(), "IcmGp::predict: bad query");
    const Eigen::Index n = inputs_.rows();
    gp::KernelSpec base(kind_, 1.0, lengthscales_);
    Vector kstar(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      kstar[i] = task_cov_(t, task_[static_cast<std::size_t>(i)]) *
                 gp::kernel_eval(base, x, Vector(inputs_.row(i).transpose()));
    }
    double mean = kstar.dot(alpha_);
    Vector v = llt_.matrixL().solve(kstar);
    double var = std::max(0.0, task_cov_(t, t) - v.squaredNorm());
    const double s = scale_[static_cast<std::size_t>(t)];
    return {offset_[static_cast<std::size_t>(t)] + s * mean, s * s * var};
  }

 private:
  void standardize(const TaskObservations& obs) {
    offset_.assign(static_cast<std::size_t>(num_tasks_), 0.0);
    scale_.assign(static_cast<std::size_t>(num_tasks_), 1.0);
    std::vector<std::vector<double>> per(static_cast<std::size_t>(num_tasks_));
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      per[static_cast<std::size_t>(obs.task[static_cast<std::size_t>(i)])].push_back(obs.outputs[i]);
    }
    double pooled = 0.0;
    int pooled_count = 0;
    for (int t = 0; t < num_tasks_; ++t) {
      const auto& v = per[static_cast<std::size_t>(t)];
      if (v.empty()) continue;
      double mean = 0.0;
      for (double y : v) mean += y;
      mean /= static_cast<double>(v.size());
      offset_[static_cast<std::size_t>(t)] = mean;
      if (v.size() >= 2) {
        double ss = 0.0;
        for (double y : v) ss += (y - mean) * (y - mean);
        double sd = std::sqrt(ss / static_cast<double>(v.size()));
        if (sd > 1e-12) {
          scale_[static_cast<std::size_t>(t)] = sd;
          pooled += sd;
          ++pooled_count;
        }
      }
    }
    // Tasks with a single observation borrow the other tasks' scale.
    for (int t = 0; t < num_tasks_; ++t) {
      if (per[static_cast<std::size_t>(t)].size() < 2 && pooled_count > 0) {
        scale_[static_cast<std::size_t>(t)] = pooled / pooled_count;
      }
    }
    y_.resize(obs.size());
    for (Eigen::Index i = 0; i < obs.size(); ++i) {
      const auto t = static_cast<std::size_t>(obs.task[static_cast<std::size_t>(i)]);
      y_[i] = (obs.outputs[i] - offset_[t]) / scale_[t];
    }
  }

  int num_params() const {
    return dim_ + num_tasks_ * (num_tasks_ + 1) / 2 + 1;
  }

  Matrix chol_factor(const Vector& p) const {
    Matrix l = Matrix::Zero(num_tasks_, num_tasks_);
    int k = dim_;
    for (int i = 0; i < num_tasks_; ++i) l(i, i) = std::exp(p[k++]);
    for (int i = 0; i < num_tasks_; ++i) {
      for (int j = 0; j < i; ++j) l(i, j) = p[k++];
    }
    return l;
  }

  gp::CovarianceWithGradients covariance(const Vector& p, double nugget) const {
    const Eigen::Index n = inputs_.rows();
    gp::KernelSpec base(kind_, 1.0, p.head(dim_).array().exp());
    Matrix kx = gp::kernel_matrix(base, inputs_);
    std::vector<Matrix> dkx = gp::kernel_matrix_gradients(base, inputs_, kx);
    Matrix l = chol_factor(p);
    Matrix b = l * l.transpose();
    auto expand = [&](const Matrix& task_matrix, const Matrix& base_matrix) {
      Matrix out(n, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
          out(i, j) = task_matrix(task_[static_cast<std::size_t>(i)],
                                  task_[static_cast<std::size_t>(j)]) *
                      base_matrix(i, j);
        }
      }
      return out;
    };
    gp::CovarianceWithGradients cov;
    cov.ky = expand(b, kx);
    for (int d = 0; d < dim_; ++d) {
      cov.gradients.push_back(expand(b, dkx[static_cast<std::size_t>(d + 1)]));
    }
    // dB / dL_ab = E_ab L' + L E_ba.
    auto db = [&](int a, int c) {
      Matrix e = Matrix::Zero(num_tasks_, num_tasks_);
      e(a, c) = 1.0;
      return Matrix(e * l.transpose() + l * e.transpose());
    };
    for (int i = 0; i < num_tasks_; ++i) {
      cov.gradients.push_back(expand(l(i, i) * db(i, i), kx));
    }
    for (int i = 0; i < num_tasks_; ++i) {
      for (int j = 0; j < i; ++j) cov.gradients.push_back(expand(db(i, j), kx));
    }
    const double noise = std::exp(p[num_params() - 1]);
    cov.ky.diagonal().array() += noise + nugget * 1e-4;
    cov.gradients.push_back(noise * Matrix::Identity(n, n));
    return cov;
  }

  Box bounds(const IcmOptions& o) const {
    const int np = num_params();
    Box box{Vector(np), Vector(np)};
    box.lower.head(dim_).setConstant(std::log(1e-3));
    box.upper.head(dim_).setConstant(std::log(1e3));
    int k = dim_;
    for (int i = 0; i < num_tasks_; ++i, ++k) {
      box.lower[k] = 0.5 * std::log(1e-6);
      box.upper[k] = 0.5 * std::log(1e4);
    }
    for (; k < np - 1; ++k) {
      box.lower[k] = -100.0;
      box.upper[k] = 100.0;
    }
    box.lower[np - 1] = std::log(o.nugget);
    box.upper[np - 1] = std::log(std::max(o.noise_max, o.nugget));
    return box;
  }

  Vector optimize(const IcmOptions& o, const std::optional<Vector>& warm) const {
    const int np = num_params();
    Box box = bounds(o);
    Vector heuristic = Vector::Zero(np);
    for (int d = 0; d < dim_; ++d) {
      double mean = inputs_.col(d).mean();
      double sd = std::sqrt((inputs_.col(d).array() - mean).square().mean());
      heuristic[d] = std::log(sd > 1e-9 ? sd : 1.0);
    }
    // Diagonal L = 1 with moderate positive coupling.
    int k = dim_ + num_tasks_;
    for (int i = 0; i < num_tasks_; ++i) {
      for (int j = 0; j < i; ++j) heuristic[k++] = 0.5;
    }
    heuristic[np - 1] = std::log(std::max(1e-3, o.nugget));
    std::vector<Vector> starts{box.clamp(heuristic)};
    if (warm && warm->size() == np) starts.push_back(box.clamp(*warm));
    Rng rng(o.seed);
    while (static_cast<int>(starts.size()) < o.restarts) {
      Vector s = heuristic;
      for (int d = 0; d < dim_; ++d) s[d] += rng.uniform(-2.0, 2.0);
      for (int i = dim_; i < dim_ + num_tasks_; ++i) s[i] += rng.uniform(-1.0, 1.0);
      for (int i = dim_ + num_tasks_; i < np - 1; ++i) s[i] = rng.uniform(-1.0, 1.0);
      s[np - 1] += rng.uniform(-3.0, 1.0);
      starts.push_back(box.clamp(s));
    }
    auto objective = [&](const Vector& p) {
      return gp::log_evidence(covariance(p, o.nugget), y_);
    };
    gp::AscentResult best;
    for (const Vector& s : starts) {
      gp::AscentResult r = gp::projected_ascent(objective, s, box, o.ascent);
      if (r.value > best.value) best = std::move(r);
    }
    if (!std::isfinite(best.value)) return starts.front();
    return best.params;
  }

  void condition(const IcmOptions& o) {
    gp::CovarianceWithGradients cov = covariance(params_, o.nugget);
    noise_ = std::exp(params_[num_params() - 1]);
    lengthscales_ = params_.head(dim_).array().exp();
    Matrix l = chol_factor(params_);
    task_cov_ = l * l.transpose();
    for (double jitter = 0.0; jitter <= 1e-4; jitter = jitter == 0.0 ? 1e-10 : jitter * 10) {
      Matrix ky = cov.ky;
      ky.diagonal().array() += jitter;
      llt_.compute(ky);
      if (llt_.info() == Eigen::Success) {
        alpha_ = llt_.solve(y_);
        if (alpha_.allFinite()) return;
      }
    }
    throw NumericalFailure("IcmGp: covariance factorization failed");
  }

  int num_tasks_ = 1;
  int dim_ = 0;
  gp::KernelKind kind_ = gp::KernelKind::kSquaredExponential;
  Matrix inputs_;
  std::vector<int> task_;
  Vector y_;
  std::vector<double> offset_;
  std::vector<double> scale_;
  Vector params_;
  Vector lengthscales_;
  Matrix task_cov_;
  double noise_ = 0.0;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
};

}  // namespace hbo::bo
