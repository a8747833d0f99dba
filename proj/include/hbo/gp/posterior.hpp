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
#include <string>

#include "hbo/core.hpp"
#include "hbo/gp/kernel.hpp"

namespace hbo::gp {

/// Noisy observations y_i = f(xi_i) + eps_i, eps_i ~ N(0, noise_variance).
struct GpDataset {
  Matrix inputs;   // n x d
  Vector outputs;  // n
  double noise_variance = 0.0;

  GpDataset() = default;
  GpDataset(Matrix x, Vector y, double noise)
      : inputs(std::move(x)), outputs(std::move(y)), noise_variance(noise) {
    validate();
  }

  static GpDataset empty(Eigen::Index dim, double noise) {
    return GpDataset(Matrix(0, dim), Vector(0), noise);
  }

  Eigen::Index size() const { return outputs.size(); }
  Eigen::Index dim() const { return inputs.cols(); }

  void validate() const {
    require(inputs.rows() == outputs.size(),
            "dataset: input row count differs from output count");
    require(std::isfinite(noise_variance) && noise_variance >= 0.0,
            "dataset: noise variance must be nonnegative");
    require(inputs.allFinite() && outputs.allFinite(),
            "dataset: non-finite training data");
  }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
};

struct JitterPolicy {
  double initial = 1e-10;  // relative to the signal variance
  double maximum = 1e-4;
  double factor = 10.0;
};

/// Exact GP posterior with a cached Cholesky factor of
/// k_y = k(X, X) + (noise + jitter) I. Immutable once constructed.
class GpPosterior {
 public:
  GpPosterior() = default;

  const KernelSpec& kernel() const { return kernel_; }
  const GpDataset& data() const { return data_; }
  double prior_mean() const { return prior_mean_; }
  double jitter() const { return jitter_; }
  const Vector& weights() const { return alpha_; }
  Eigen::Index size() const { return data_.size(); }

  /// 0.5 * log det(I + K / s2) with s2 the effective diagonal noise: the
  /// information gained from the training set.
  double information_gain() const { return information_gain_; }

  Prediction predict(const Vector& query) const {
    check_query(query);
    Prediction out;
    const double prior_var = kernel_.signal_variance;
    if (size() == 0) {
      out.mean = prior_mean_;
      out.variance = prior_var;
      return out;
    }
    Vector kstar = cross_covariance(query);
    out.mean = prior_mean_ + kstar.dot(alpha_);
    Vector v = llt_.matrixL().solve(kstar);
    out.variance = std::max(0.0, prior_var - v.squaredNorm());
    return out;
  }

  double predict_mean(const Vector& query) const {
    if (size() == 0) return prior_mean_;
    return prior_mean_ + cross_covariance(query).dot(alpha_);
  }

  /// Unchecked mean for hot loops; the query must be finite with dim() entries.
  template <typename Derived>
  double predict_mean_unchecked(const Eigen::MatrixBase<Derived>& query) const {
    if (size() == 0) return prior_mean_;
    return prior_mean_ +
           kernel_.signal_variance * profile(scaled_distances(query)).matrix().dot(alpha_);
  }

  Vector cross_covariance(const Vector& query) const {
    return kernel_.signal_variance * profile(scaled_distances(query)).matrix();
  }

  friend GpPosterior condition(const KernelSpec&, const GpDataset&, double,
                               const JitterPolicy&);

 private:
  // Squared scaled distances from the query to every training input,
  // accumulated column by column (inputs are stored column-major).
  template <typename Derived>
  Eigen::ArrayXd scaled_distances(const Eigen::MatrixBase<Derived>& query) const {
    const Eigen::Index d = scaled_inputs_.cols();
    Eigen::ArrayXd r2 = Eigen::ArrayXd::Zero(scaled_inputs_.rows());
    for (Eigen::Index j = 0; j < d; ++j) {
      r2 += (scaled_inputs_.col(j).array() - query[j] * inv_lengthscales_[j]).square();
    }
    return r2;
  }

  Eigen::ArrayXd profile(const Eigen::ArrayXd& r2) const {
    if (kernel_.kind == KernelKind::kSquaredExponential) {
      return (-0.5 * r2).exp();
    }
    Eigen::ArrayXd s5r = std::sqrt(5.0) * r2.sqrt();
    return (1.0 + s5r + 5.0 / 3.0 * r2) * (-s5r).exp();
  }

  void check_query(const Vector& query) const {
    if (query.size() != kernel_.dim()) {
      throw InvalidArgument("predict: query has dimension " +
                            std::to_string(query.size()) + ", expected " +
                            std::to_string(kernel_.dim()));
    }
    if (!query.allFinite()) throw InvalidArgument("predict: non-finite query");
  }

  KernelSpec kernel_;
  GpDataset data_;
  double prior_mean_ = 0.0;
  double jitter_ = 0.0;
  double information_gain_ = 0.0;
  Eigen::LLT<Matrix> llt_;
  Vector alpha_;
  Matrix scaled_inputs_;
  Eigen::ArrayXd inv_lengthscales_;
};

/// Conditions the prior GP(prior_mean, kernel) on `data`. Jitter starts at
/// policy.initial * sf2 and grows by policy.factor until the factorization
/// succeeds or policy.maximum * sf2 is exceeded.
inline GpPosterior condition(const KernelSpec& kernel, const GpDataset& data,
                             double prior_mean,
                             const JitterPolicy& policy = {}) {
  kernel.validate();
  data.validate();
  require(data.dim() == kernel.dim() || data.size() == 0,
          "condition: dataset dimension does not match kernel");
  require(std::isfinite(prior_mean), "condition: non-finite prior mean");

  GpPosterior post;
  post.kernel_ = kernel;
  post.data_ = data;
  if (post.data_.inputs.cols() != kernel.dim()) {
    post.data_.inputs.resize(0, kernel.dim());
  }
  post.prior_mean_ = prior_mean;
  post.inv_lengthscales_ = kernel.lengthscales.array().inverse();
  post.scaled_inputs_ =
      post.data_.inputs.array().rowwise() * post.inv_lengthscales_.transpose();
  const Eigen::Index n = data.size();
  if (n == 0) return post;

  Matrix ky = kernel_matrix(kernel, post.data_.inputs);
  ky.diagonal().array() += data.noise_variance;
  for (double rel = policy.initial; rel <= policy.maximum * (1.0 + 1e-12);
       rel *= policy.factor) {
    const double jitter = rel * kernel.signal_variance;
    Matrix attempt = ky;
    attempt.diagonal().array() += jitter;
    post.llt_.compute(attempt);
    if (post.llt_.info() != Eigen::Success) continue;
    auto diag = post.llt_.matrixLLT().diagonal();
    if (!diag.allFinite() || (diag.array() <= 0.0).any()) continue;
    post.jitter_ = jitter;
    Vector centered = data.outputs.array() - prior_mean;
    post.alpha_ = post.llt_.solve(centered);
    if (!post.alpha_.allFinite()) continue;
    const double s2 = data.noise_variance + jitter;
    post.information_gain_ =
        0.5 * (diag.array().square() / s2).log().sum();
    return post;
  }
  throw NumericalFailure("condition: Cholesky factorization failed after "
                         "jitter escalation to " +
                         std::to_string(policy.maximum) + " * sf2");
}

}  // namespace hbo::gp
