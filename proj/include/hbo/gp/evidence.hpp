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
#include <numbers>
#include <optional>
#include <vector>

#include "hbo/core.hpp"
#include "hbo/gp/kernel.hpp"
#include "hbo/gp/posterior.hpp"
#include "hbo/random.hpp"

namespace hbo::gp {

/// Training covariance k_y(p) and its partial derivatives in the log-space
/// parameters p.
struct CovarianceWithGradients {
  Matrix ky;
  std::vector<Matrix> gradients;
};

struct EvidenceValue {
  double log_likelihood = -std::numeric_limits<double>::infinity();
  Vector gradient;
};

/// log N(y | 0, k_y) and its gradient
/// 0.5 * (alpha' dK alpha - tr(k_y^-1 dK)).
inline EvidenceValue log_evidence(const CovarianceWithGradients& cov,
                                  const Vector& centered_y) {
  EvidenceValue out;
  out.gradient = Vector::Zero(static_cast<Eigen::Index>(cov.gradients.size()));
  const Eigen::Index n = centered_y.size();
  Eigen::LLT<Matrix> llt(cov.ky);
  if (llt.info() != Eigen::Success) return out;
  auto diag = llt.matrixLLT().diagonal();
  if (!diag.allFinite() || (diag.array() <= 0.0).any()) return out;
  Vector alpha = llt.solve(centered_y);
  double log_det_half = diag.array().log().sum();
  out.log_likelihood = -0.5 * centered_y.dot(alpha) - log_det_half -
                       0.5 * static_cast<double>(n) *
                           std::log(2.0 * std::numbers::pi);
  if (!std::isfinite(out.log_likelihood)) {
    out.log_likelihood = -std::numeric_limits<double>::infinity();
    return out;
  }
  Matrix inverse = llt.solve(Matrix::Identity(n, n));
  for (std::size_t i = 0; i < cov.gradients.size(); ++i) {
    const Matrix& dk = cov.gradients[i];
    double quad = alpha.dot(dk * alpha);
    double trace = inverse.cwiseProduct(dk).sum();
    out.gradient[static_cast<Eigen::Index>(i)] = 0.5 * (quad - trace);
  }
  return out;
}

struct AscentOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-5;
  double armijo = 1e-4;
  int max_backtracks = 30;
};

struct AscentResult {
  Vector params;
  double value = -std::numeric_limits<double>::infinity();
  int accepted_steps = 0;
};

/// Projected gradient ascent with Barzilai-Borwein trial steps and Armijo
/// backtracking. `objective(p)` returns an EvidenceValue.
template <typename Objective>
AscentResult projected_ascent(Objective&& objective, Vector start,
                              const Box& box, const AscentOptions& opt) {
  AscentResult res;
  res.params = box.clamp(start);
  EvidenceValue cur = objective(res.params);
  res.value = cur.log_likelihood;
  if (!std::isfinite(res.value)) return res;

  double step = 1.0 / std::max(1.0, cur.gradient.lpNorm<Eigen::Infinity>());
  Vector prev_p, prev_g;
  for (int it = 0; it < opt.max_iterations; ++it) {
    Vector pg = box.clamp(res.params + cur.gradient) - res.params;
    if (pg.norm() < opt.gradient_tolerance) break;
    if (prev_p.size() > 0) {
      Vector s = res.params - prev_p;
      Vector y = prev_g - cur.gradient;  // ascent: negate for curvature
      double sy = s.dot(y);
      if (sy > 1e-16) step = std::clamp(s.dot(s) / sy, 1e-8, 1e3);
    }
    bool accepted = false;
    double trial_step = step;
    for (int bt = 0; bt < opt.max_backtracks; ++bt) {
      Vector cand = box.clamp(res.params + trial_step * cur.gradient);
      Vector delta = cand - res.params;
      if (delta.norm() < 1e-14) break;
      EvidenceValue next = objective(cand);
      if (std::isfinite(next.log_likelihood) &&
          next.log_likelihood >=
              cur.log_likelihood + opt.armijo * cur.gradient.dot(delta)) {
        prev_p = res.params;
        prev_g = cur.gradient;
        res.params = cand;
        cur = std::move(next);
        res.value = cur.log_likelihood;
        ++res.accepted_steps;
        accepted = true;
        break;
      }
      trial_step *= 0.5;
    }
    if (!accepted) break;
  }
  return res;
}

/// Hyperparameter bounds, natural units.
struct HyperBounds {
  double lengthscale_min = 1e-3;
  double lengthscale_max = 1e3;
  double signal_variance_min = 1e-6;
  double signal_variance_max = 1e4;
  double noise_variance_max = 1e2;
};

struct FitOptions {
  int restarts = 8;
  bool fit_noise = false;
  std::optional<double> prior_mean;  // default: mean of the outputs
  std::optional<KernelSpec> warm_start;
  std::uint64_t seed = 0x5eed;
  HyperBounds bounds;
  AscentOptions ascent;
};

struct FitResult {
  KernelSpec kernel;
  double noise_variance = 0.0;
  double prior_mean = 0.0;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  // Best starting point's log likelihood (before ascent).
  double best_initial_log_likelihood = -std::numeric_limits<double>::infinity();
  bool warning = false;
};

inline double mean_or_zero(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.mean();
}

/// Evidence maximization over [log sf2, log ell..., (log noise)] by
/// multi-start projected gradient ascent. The noise variance is held at the
/// dataset value unless options.fit_noise is set, in which case the dataset
/// value is its lower bound.
inline FitResult fit_hyperparameters(KernelKind kind, const GpDataset& data,
                                     const FitOptions& options = {}) {
  data.validate();
  require(data.size() >= 2, "fit_hyperparameters: need at least two points");
  require(options.restarts >= 1, "fit_hyperparameters: restarts must be >= 1");
  const Eigen::Index d = data.dim();
  const HyperBounds& hb = options.bounds;
  const double noise_floor = std::max(data.noise_variance, 1e-12);

  FitResult result;
  result.prior_mean = options.prior_mean.value_or(data.outputs.mean());
  const Vector centered = data.outputs.array() - result.prior_mean;

  const Eigen::Index np = d + 1 + (options.fit_noise ? 1 : 0);
  Box box{Vector(np), Vector(np)};
  box.lower[0] = std::log(hb.signal_variance_min);
  box.upper[0] = std::log(hb.signal_variance_max);
  box.lower.segment(1, d).setConstant(std::log(hb.lengthscale_min));
  box.upper.segment(1, d).setConstant(std::log(hb.lengthscale_max));
  if (options.fit_noise) {
    box.lower[np - 1] = std::log(noise_floor);
    box.upper[np - 1] = std::log(std::max(hb.noise_variance_max, noise_floor));
  }

  auto unpack_noise = [&](const Vector& p) {
    return options.fit_noise ? std::exp(p[np - 1]) : data.noise_variance;
  };
  auto objective = [&](const Vector& p) {
    KernelSpec spec = KernelSpec::from_log_params(kind, p.head(d + 1));
    CovarianceWithGradients cov;
    cov.ky = kernel_matrix(spec, data.inputs);
    cov.gradients = kernel_matrix_gradients(spec, data.inputs, cov.ky);
    const double noise = unpack_noise(p);
    // Same jitter floor as conditioning.
    cov.ky.diagonal().array() += noise + 1e-10 * spec.signal_variance;
    if (options.fit_noise) {
      cov.gradients.push_back(
          noise * Matrix::Identity(data.size(), data.size()));
    }
    return log_evidence(cov, centered);
  };

  // Heuristic start: per-dimension input spread and output variance.
  Vector heuristic(np);
  double var_y = centered.squaredNorm() / static_cast<double>(data.size());
  heuristic[0] = std::log(std::max(var_y, 1e-2));
  for (Eigen::Index j = 0; j < d; ++j) {
    double mean = data.inputs.col(j).mean();
    double sd = std::sqrt((data.inputs.col(j).array() - mean).square().mean());
    heuristic[1 + j] = std::log(sd > 1e-9 ? sd : 1.0);
  }
  if (options.fit_noise) heuristic[np - 1] = std::log(std::max(1e-2 * std::max(var_y, 1e-2), noise_floor));

  std::vector<Vector> starts;
  starts.push_back(box.clamp(heuristic));
  if (options.warm_start && options.warm_start->dim() == d) {
    Vector w = heuristic;
    w.head(d + 1) = options.warm_start->log_params();
    starts.push_back(box.clamp(w));
  }
  Rng rng(options.seed);
  while (static_cast<int>(starts.size()) < options.restarts) {
    Vector s = heuristic;
    s[0] += rng.uniform(-1.0, 1.0);
    for (Eigen::Index j = 0; j < d; ++j) s[1 + j] += rng.uniform(-2.0, 2.0);
    if (options.fit_noise) s[np - 1] += rng.uniform(-2.0, 2.0);
    starts.push_back(box.clamp(s));
  }

  AscentResult best;
  Vector best_start = starts.front();
  for (const Vector& s : starts) {
    double initial = objective(s).log_likelihood;
    if (initial > result.best_initial_log_likelihood) {
      result.best_initial_log_likelihood = initial;
      best_start = s;
    }
    AscentResult r = projected_ascent(objective, s, box, options.ascent);
    if (r.value > best.value) best = std::move(r);
  }

  if (!std::isfinite(best.value)) {
    // Every start failed: fall back to the best initialization.
    result.warning = true;
    best.params = best_start;
    best.value = result.best_initial_log_likelihood;
  } else if (best.accepted_steps == 0 &&
             best.value < result.best_initial_log_likelihood) {
    result.warning = true;
  }
  result.kernel = KernelSpec::from_log_params(kind, best.params.head(d + 1));
  result.noise_variance = unpack_noise(best.params);
  result.log_likelihood = best.value;
  return result;
}

/// Log marginal likelihood of data under a fixed kernel and prior mean.
inline double log_marginal_likelihood(const KernelSpec& kernel,
                                      const GpDataset& data, double prior_mean) {
  CovarianceWithGradients cov;
  cov.ky = kernel_matrix(kernel, data.inputs);
  cov.ky.diagonal().array() +=
      data.noise_variance + 1e-10 * kernel.signal_variance;
  Vector centered = data.outputs.array() - prior_mean;
  return log_evidence(cov, centered).log_likelihood;
}

}  // namespace hbo::gp
