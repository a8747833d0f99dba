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
#include "hbo/gp/calibration.hpp"
#include "hbo/gp/evidence.hpp"
#include "hbo/gp/kernel.hpp"
#include "hbo/gp/posterior.hpp"

namespace hbo::gp {

struct ScaledGpOptions {
  KernelKind kind = KernelKind::kSquaredExponential;
  // Added to the standardized noise variance of every output.
  double nugget = 1e-6;
  bool refit = true;
  // Hyperparameter fitting runs on an evenly strided subset of this size.
  int max_fit_points = 200;
  FitOptions fit;
};

/// A GP on standardized outputs: y_std = (y - offset) / scale. Predictions and
/// error radii are reported in raw units.
class ScaledGp {
 public:
  ScaledGp() = default;

  /// `raw_noise_variance` is the observation noise in raw output units.
  /// With refit off, `previous` (or a unit kernel) supplies the
  /// hyperparameters.
  static ScaledGp train(const Matrix& inputs, const Vector& raw_outputs,
                        double raw_noise_variance,
                        const ScaledGpOptions& options,
                        const std::optional<KernelSpec>& previous) {
    require(inputs.rows() == raw_outputs.size(),
            "ScaledGp: input rows differ from output count");
    ScaledGp gp;
    const Eigen::Index n = raw_outputs.size();
    const Eigen::Index d = inputs.cols();
    if (n > 0) {
      gp.offset_ = raw_outputs.mean();
      double sd = std::sqrt(
          (raw_outputs.array() - gp.offset_).square().sum() /
          static_cast<double>(n));
      gp.scale_ = sd > 1e-12 ? sd : 1.0;
    }
    gp.raw_noise_variance_ = raw_noise_variance;
    Vector y = (raw_outputs.array() - gp.offset_) / gp.scale_;
    double noise =
        raw_noise_variance / (gp.scale_ * gp.scale_) + options.nugget;

    KernelSpec kernel = previous && previous->dim() == d
                            ? *previous
                            : KernelSpec::isotropic(options.kind, 1.0, 1.0,
                                                    static_cast<int>(d));
    if (options.refit && n >= 2) {
      GpDataset fit_set = strided_subset(inputs, y, noise, options.max_fit_points);
      FitOptions fo = options.fit;
      fo.prior_mean = 0.0;
      if (previous && previous->dim() == d) fo.warm_start = *previous;
      FitResult fit = fit_hyperparameters(options.kind, fit_set, fo);
      kernel = fit.kernel;
      if (fo.fit_noise) noise = std::max(noise, fit.noise_variance);
    }
    gp.posterior_ = condition(kernel, GpDataset(inputs, y, noise), 0.0);
    gp.max_abs_standardized_ = n > 0 ? y.cwiseAbs().maxCoeff() : 0.0;
    return gp;
  }

  /// Wraps an already conditioned posterior (unit scaling).
  static ScaledGp wrap(GpPosterior posterior, double raw_noise_variance) {
    ScaledGp gp;
    gp.posterior_ = std::move(posterior);
    gp.raw_noise_variance_ = raw_noise_variance;
    if (gp.posterior_.size() > 0) {
      gp.max_abs_standardized_ =
          (gp.posterior_.data().outputs.array() - gp.posterior_.prior_mean())
              .abs()
              .maxCoeff();
    }
    return gp;
  }

  const GpPosterior& posterior() const { return posterior_; }
  const KernelSpec& kernel() const { return posterior_.kernel(); }
  double offset() const { return offset_; }
  double scale() const { return scale_; }

  Prediction predict(const Vector& query) const {
    Prediction p = posterior_.predict(query);
    return {offset_ + scale_ * p.mean, scale_ * scale_ * p.variance};
  }

  template <typename Derived>
  double predict_mean_unchecked(const Eigen::MatrixBase<Derived>& q) const {
    return offset_ + scale_ * posterior_.predict_mean_unchecked(q);
  }

  /// Calibration constants in standardized units: B is twice the largest
  /// observed |y_std| (one when there is no data), R the standardized noise
  /// standard deviation, gamma the information gain of the training set.
  CalibrationConfig calibration(double confidence) const {
    CalibrationConfig cfg;
    if (rkhs_bound_) {
      cfg.rkhs_bound = *rkhs_bound_;
    } else {
      cfg.rkhs_bound = posterior_.size() > 0
                           ? std::max(2.0 * max_abs_standardized_, 1e-12)
                           : 1.0;
    }
    cfg.noise_subgaussian = std::sqrt(raw_noise_variance_) / scale_;
    cfg.info_gain = std::max(0.0, posterior_.information_gain());
    cfg.confidence = confidence;
    return cfg;
  }

  /// Replaces the heuristic B with a known RKHS norm (standardized units).
  void set_rkhs_bound(double b) {
    require(std::isfinite(b) && b >= 0.0, "ScaledGp: RKHS bound must be nonnegative");
    rkhs_bound_ = b;
  }

  /// Calibrated error radius beta * sqrt(var) in raw units.
  double error_radius(const Vector& query, double confidence) const {
    Prediction p = posterior_.predict(query);
    return scale_ * calibration_beta(calibration(confidence)) *
           std::sqrt(p.variance);
  }

 private:
  static GpDataset strided_subset(const Matrix& x, const Vector& y,
                                  double noise, int max_points) {
    const Eigen::Index n = y.size();
    if (max_points <= 0 || n <= max_points) return GpDataset(x, y, noise);
    Matrix xs(max_points, x.cols());
    Vector ys(max_points);
    for (int i = 0; i < max_points; ++i) {
      Eigen::Index src = static_cast<Eigen::Index>(
          (static_cast<double>(i) + 0.5) * static_cast<double>(n) / max_points);
      xs.row(i) = x.row(src);
      ys[i] = y[src];
    }
    return GpDataset(std::move(xs), std::move(ys), noise);
  }

  GpPosterior posterior_;
  double offset_ = 0.0;
  double scale_ = 1.0;
  double raw_noise_variance_ = 0.0;
  double max_abs_standardized_ = 0.0;
  std::optional<double> rkhs_bound_;
};

struct VectorPrediction {
  Vector mean;
  Vector eps;  // calibrated per-output error radii
};

/// Independent GPs, one per output, sharing training inputs.
class MultiOutputGp {
 public:
  MultiOutputGp() = default;
  MultiOutputGp(std::vector<ScaledGp> outputs, double delta)
      : outputs_(std::move(outputs)), delta_(delta) {
    require(!outputs_.empty(), "MultiOutputGp: need at least one output");
    per_output_ = per_output_confidence(delta_, size());
    const Matrix& x0 = outputs_.front().posterior().data().inputs;
    for (const ScaledGp& g : outputs_) {
      const Matrix& xi = g.posterior().data().inputs;
      require(xi.rows() == x0.rows() && xi.cols() == x0.cols() && xi == x0,
              "MultiOutputGp: outputs must share identical training inputs");
    }
    betas_.resize(size());
    for (int i = 0; i < size(); ++i) {
      betas_[static_cast<std::size_t>(i)] =
          calibration_beta(outputs_[static_cast<std::size_t>(i)].calibration(
              per_output_));
    }
  }

  int size() const { return static_cast<int>(outputs_.size()); }
  const ScaledGp& output(int i) const {
    return outputs_.at(static_cast<std::size_t>(i));
  }
  double delta() const { return delta_; }
  double per_output_delta() const { return per_output_; }
  double beta(int i) const { return betas_.at(static_cast<std::size_t>(i)); }
  Eigen::Index input_dim() const { return outputs_.front().kernel().dim(); }

  VectorPrediction predict_vector(const Vector& query) const {
    VectorPrediction out{Vector(size()), Vector(size())};
    for (int i = 0; i < size(); ++i) {
      const ScaledGp& g = outputs_[static_cast<std::size_t>(i)];
      Prediction p = g.posterior().predict(query);
      out.mean[i] = g.offset() + g.scale() * p.mean;
      out.eps[i] = g.scale() * beta(i) * std::sqrt(p.variance);
    }
    return out;
  }

  template <typename Derived>
  Vector predict_mean_unchecked(const Eigen::MatrixBase<Derived>& q) const {
    Vector out(size());
    for (int i = 0; i < size(); ++i) {
      out[i] = outputs_[static_cast<std::size_t>(i)].predict_mean_unchecked(q);
    }
    return out;
  }

 private:
  std::vector<ScaledGp> outputs_;
  double delta_ = 0.05;
  double per_output_ = 0.05;
  std::vector<double> betas_;
};

}  // namespace hbo::gp
