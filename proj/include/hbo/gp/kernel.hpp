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
#include <string>
#include <vector>

#include "hbo/core.hpp"

namespace hbo::gp {

enum class KernelKind { kSquaredExponential, kMatern52 };

inline std::string to_string(KernelKind kind) {
  return kind == KernelKind::kSquaredExponential ? "se" : "matern52";
}

inline KernelKind kernel_kind_from_string(const std::string& name) {
  if (name == "se" || name == "squared-exponential") {
    return KernelKind::kSquaredExponential;
  }
  if (name == "matern52" || name == "matern-5/2") return KernelKind::kMatern52;
  throw InvalidArgument("unknown kernel kind '" + name + "'");
}

/// Stationary ARD kernel: k(a, b) = sf2 * g(r), r the lengthscale-scaled
/// distance between a and b.
struct KernelSpec {
  KernelKind kind = KernelKind::kSquaredExponential;
  double signal_variance = 1.0;
  Vector lengthscales;

  KernelSpec() = default;
  KernelSpec(KernelKind k, double sf2, Vector ell)
      : kind(k), signal_variance(sf2), lengthscales(std::move(ell)) {
    validate();
  }

  static KernelSpec isotropic(KernelKind k, double sf2, double ell, int dim) {
    return KernelSpec(k, sf2, Vector::Constant(dim, ell));
  }

  Eigen::Index dim() const { return lengthscales.size(); }

  void validate() const {
    require(std::isfinite(signal_variance) && signal_variance > 0.0,
            "kernel signal variance must be positive");
    require(lengthscales.size() > 0, "kernel needs at least one lengthscale");
    require(lengthscales.allFinite() && (lengthscales.array() > 0.0).all(),
            "kernel lengthscales must be positive");
  }

  // Log-space parameter vector: [log sf2, log ell_1, ..., log ell_d].
  Vector log_params() const {
    Vector p(dim() + 1);
    p[0] = std::log(signal_variance);
    p.tail(dim()) = lengthscales.array().log();
    return p;
  }

  static KernelSpec from_log_params(KernelKind kind, const Vector& p) {
    return KernelSpec(kind, std::exp(p[0]), p.tail(p.size() - 1).array().exp());
  }
};

namespace detail {

inline double profile(KernelKind kind, double r2) {
  if (kind == KernelKind::kSquaredExponential) return std::exp(-0.5 * r2);
  double r = std::sqrt(r2);
  double s5r = std::sqrt(5.0) * r;
  return (1.0 + s5r + 5.0 * r2 / 3.0) * std::exp(-s5r);
}

// d profile / d(r^2) scaled so that d k / d log(ell_i) = sf2 * w(r2) * u_i^2,
// u_i = (a_i - b_i) / ell_i.
inline double lengthscale_weight(KernelKind kind, double r2) {
  if (kind == KernelKind::kSquaredExponential) return std::exp(-0.5 * r2);
  double r = std::sqrt(r2);
  double s5r = std::sqrt(5.0) * r;
  return 5.0 / 3.0 * (1.0 + s5r) * std::exp(-s5r);
}

}  // namespace detail

template <typename A, typename B>
double kernel_eval(const KernelSpec& spec, const Eigen::MatrixBase<A>& a,
                   const Eigen::MatrixBase<B>& b) {
  if (a.size() != spec.dim() || b.size() != spec.dim()) {
    throw InvalidArgument("kernel_eval: input dimension " +
                          std::to_string(a.size()) + "/" +
                          std::to_string(b.size()) + " does not match " +
                          std::to_string(spec.dim()) + " lengthscales");
  }
  double r2 =
      ((a - b).array() / spec.lengthscales.array()).square().sum();
  return spec.signal_variance * detail::profile(spec.kind, r2);
}

/// Cross-covariance between row sets: out(i, j) = k(rows_a(i), rows_b(j)).
inline Matrix kernel_matrix(const KernelSpec& spec, const Matrix& rows_a,
                            const Matrix& rows_b) {
  require(rows_a.cols() == spec.dim() && rows_b.cols() == spec.dim(),
          "kernel_matrix: column count does not match lengthscales");
  Eigen::ArrayXd inv_ell = spec.lengthscales.array().inverse();
  Matrix sa = rows_a.array().rowwise() * inv_ell.transpose();
  Matrix sb = rows_b.array().rowwise() * inv_ell.transpose();
  Matrix out(rows_a.rows(), rows_b.rows());
  for (Eigen::Index j = 0; j < sb.rows(); ++j) {
    for (Eigen::Index i = 0; i < sa.rows(); ++i) {
      double r2 = (sa.row(i) - sb.row(j)).squaredNorm();
      out(i, j) = spec.signal_variance * detail::profile(spec.kind, r2);
    }
  }
  return out;
}

inline Matrix kernel_matrix(const KernelSpec& spec, const Matrix& rows) {
  require(rows.cols() == spec.dim(),
          "kernel_matrix: column count does not match lengthscales");
  Eigen::ArrayXd inv_ell = spec.lengthscales.array().inverse();
  Matrix s = rows.array().rowwise() * inv_ell.transpose();
  const Eigen::Index n = rows.rows();
  Matrix out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j, j) = spec.signal_variance;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double r2 = (s.row(i) - s.row(j)).squaredNorm();
      out(i, j) = out(j, i) =
          spec.signal_variance * detail::profile(spec.kind, r2);
    }
  }
  return out;
}

/// Gradients of the training kernel matrix with respect to the log-space
/// parameters [log sf2, log ell_1..d]. `k` must be kernel_matrix(spec, rows).
inline std::vector<Matrix> kernel_matrix_gradients(const KernelSpec& spec,
                                                   const Matrix& rows,
                                                   const Matrix& k) {
  const Eigen::Index n = rows.rows();
  const Eigen::Index d = spec.dim();
  std::vector<Matrix> grads;
  grads.reserve(static_cast<std::size_t>(d + 1));
  grads.push_back(k);
  Eigen::ArrayXd inv_ell = spec.lengthscales.array().inverse();
  Matrix s = rows.array().rowwise() * inv_ell.transpose();
  Matrix weight(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    weight(j, j) = 0.0;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double r2 = (s.row(i) - s.row(j)).squaredNorm();
      weight(i, j) = weight(j, i) =
          spec.signal_variance * detail::lengthscale_weight(spec.kind, r2);
    }
  }
  for (Eigen::Index dim = 0; dim < d; ++dim) {
    Matrix g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) {
        double u = s(i, dim) - s(j, dim);
        g(i, j) = weight(i, j) * u * u;
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace hbo::gp
