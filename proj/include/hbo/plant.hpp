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

#include <Eigen/Core>
#include <unsupported/Eigen/AutoDiff>

#include "hbo/core.hpp"
#include "hbo/random.hpp"

namespace hbo {

/// Frictionless cart-pole: state (p, p_dot, phi, phi_dot), phi measured from
/// upright, pole modelled as a uniform rod of half-length l.
struct PlantConfig {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double gravity = 9.81;
  double dt = 0.05;
  // Diagonal of the additive process-noise covariance.
  State noise_variance = State::Zero();

  void validate() const {
    require(cart_mass > 0 && pole_mass > 0 && pole_half_length > 0 &&
                gravity >= 0 && dt > 0,
            "plant: masses, length and dt must be positive");
    require(noise_variance.allFinite() && (noise_variance.array() >= 0).all(),
            "plant: noise variances must be nonnegative");
  }

  static PlantConfig with_noise_std(double std) {
    PlantConfig cfg;
    cfg.noise_variance.setConstant(std * std);
    return cfg;
  }
};

template <typename T>
using StateT = Eigen::Matrix<T, kStateDim, 1>;

template <typename T>
StateT<T> continuous_dynamics(const PlantConfig& cfg, const StateT<T>& x,
                              const T& u) {
  using std::cos;
  using std::sin;
  const double total = cfg.cart_mass + cfg.pole_mass;
  const double ml = cfg.pole_mass * cfg.pole_half_length;
  const T s = sin(x[2]);
  const T c = cos(x[2]);
  const T w2 = x[3] * x[3];
  const T temp = (u + ml * w2 * s) / total;
  const T phi_acc = (cfg.gravity * s - c * temp) /
                    (cfg.pole_half_length *
                     (4.0 / 3.0 - cfg.pole_mass * c * c / total));
  const T p_acc = temp - ml * phi_acc * c / total;
  StateT<T> dx;
  dx << x[1], p_acc, x[3], phi_acc;
  return dx;
}

/// One classical RK4 step of x' = f(x) with step h.
template <typename V, typename F>
V rk4(const F& f, const V& x, double h) {
  V k1 = f(x);
  V k2 = f(V(x + 0.5 * h * k1));
  V k3 = f(V(x + 0.5 * h * k2));
  V k4 = f(V(x + h * k3));
  return V(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// Classical RK4 with the input held over one sample period.
template <typename T>
StateT<T> rk4_step(const PlantConfig& cfg, const StateT<T>& x, const T& u) {
  return rk4([&](const StateT<T>& s) { return continuous_dynamics<T>(cfg, s, u); }, x,
             cfg.dt);
}

inline State rk4_step(const PlantConfig& cfg, const State& x, double u) {
  return rk4_step<double>(cfg, x, u);
}

struct LinearizedStep {
  State next;
  Eigen::Matrix4d state_jacobian;  // d next / d x
  State input_jacobian;            // d next / d u
};

namespace detail {

using StepJacobian = Eigen::Matrix<double, kStateDim, kStateDim + 1>;

// Continuous dynamics and its Jacobian [df/dx, df/du].
inline State dynamics_with_jacobian(const PlantConfig& cfg, const State& x,
                                    double u, StepJacobian& jac) {
  const double total = cfg.cart_mass + cfg.pole_mass;
  const double l = cfg.pole_half_length;
  const double ml = cfg.pole_mass * l;
  const double s = std::sin(x[2]);
  const double c = std::cos(x[2]);
  const double w = x[3];
  const double temp = (u + ml * w * w * s) / total;
  const double dtemp_dphi = ml * w * w * c / total;
  const double dtemp_dw = 2.0 * ml * w * s / total;
  const double dtemp_du = 1.0 / total;
  const double den = l * (4.0 / 3.0 - cfg.pole_mass * c * c / total);
  const double dden_dphi = l * 2.0 * cfg.pole_mass * c * s / total;
  const double num = cfg.gravity * s - c * temp;
  const double dnum_dphi = cfg.gravity * c + s * temp - c * dtemp_dphi;
  const double phi_acc = num / den;
  const double dphi_dphi = (dnum_dphi * den - num * dden_dphi) / (den * den);
  const double dphi_dw = -c * dtemp_dw / den;
  const double dphi_du = -c * dtemp_du / den;
  const double p_acc = temp - ml * phi_acc * c / total;
  const double dp_dphi =
      dtemp_dphi - ml / total * (dphi_dphi * c - phi_acc * s);
  const double dp_dw = dtemp_dw - ml / total * c * dphi_dw;
  const double dp_du = dtemp_du - ml / total * c * dphi_du;
  jac.setZero();
  jac(0, 1) = 1.0;
  jac(1, 2) = dp_dphi;
  jac(1, 3) = dp_dw;
  jac(1, 4) = dp_du;
  jac(2, 3) = 1.0;
  jac(3, 2) = dphi_dphi;
  jac(3, 3) = dphi_dw;
  jac(3, 4) = dphi_du;
  State dx;
  dx << x[1], p_acc, x[3], phi_acc;
  return dx;
}

}  // namespace detail

/// One RK4 step and its Jacobians, chained analytically through the stages.
inline LinearizedStep rk4_step_linearized(const PlantConfig& cfg,
                                          const State& x, double u) {
  using detail::StepJacobian;
  const double h = cfg.dt;
  StepJacobian base = StepJacobian::Zero();
  base.leftCols<kStateDim>().setIdentity();
  StepJacobian j1, j2, j3, j4, jc;
  State k1 = detail::dynamics_with_jacobian(cfg, x, u, jc);
  j1 = jc;
  StepJacobian d2 = base + 0.5 * h * j1;
  State k2 = detail::dynamics_with_jacobian(cfg, State(x + 0.5 * h * k1), u, jc);
  j2.noalias() = jc.leftCols<kStateDim>() * d2;
  j2.col(kStateDim) += jc.col(kStateDim);
  StepJacobian d3 = base + 0.5 * h * j2;
  State k3 = detail::dynamics_with_jacobian(cfg, State(x + 0.5 * h * k2), u, jc);
  j3.noalias() = jc.leftCols<kStateDim>() * d3;
  j3.col(kStateDim) += jc.col(kStateDim);
  StepJacobian d4 = base + h * j3;
  State k4 = detail::dynamics_with_jacobian(cfg, State(x + h * k3), u, jc);
  j4.noalias() = jc.leftCols<kStateDim>() * d4;
  j4.col(kStateDim) += jc.col(kStateDim);
  StepJacobian total = base + (h / 6.0) * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
  LinearizedStep out;
  out.next = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  out.state_jacobian = total.leftCols<kStateDim>();
  out.input_jacobian = total.col(kStateDim);
  return out;
}

/// Same quantities by forward-mode automatic differentiation; slower, kept as
/// an independent reference.
inline LinearizedStep rk4_step_linearized_autodiff(const PlantConfig& cfg,
                                                   const State& x, double u) {
  using Deriv = Eigen::Matrix<double, kStateDim + 1, 1>;
  using Ad = Eigen::AutoDiffScalar<Deriv>;
  StateT<Ad> xa;
  for (int i = 0; i < kStateDim; ++i) {
    xa[i] = Ad(x[i], kStateDim + 1, i);
  }
  Ad ua(u, kStateDim + 1, kStateDim);
  StateT<Ad> next = rk4_step<Ad>(cfg, xa, ua);
  LinearizedStep out;
  for (int i = 0; i < kStateDim; ++i) {
    out.next[i] = next[i].value();
    out.state_jacobian.row(i) = next[i].derivatives().head<kStateDim>();
    out.input_jacobian[i] = next[i].derivatives()[kStateDim];
  }
  return out;
}

/// x+ = rk4(x, u) + w, w ~ N(0, diag(noise_variance)). Four normals are drawn
/// every call, noise or not, so streams stay aligned across noise settings.
inline State step_noisy(const PlantConfig& cfg, const State& x, double u,
                        Rng& rng) {
  State next = rk4_step(cfg, x, u);
  for (int i = 0; i < kStateDim; ++i) {
    next[i] += std::sqrt(cfg.noise_variance[i]) * rng.normal();
  }
  return next;
}

/// Total mechanical energy; conserved by the unforced continuous dynamics.
inline double mechanical_energy(const PlantConfig& cfg, const State& x) {
  const double m = cfg.pole_mass;
  const double l = cfg.pole_half_length;
  const double total = cfg.cart_mass + m;
  return 0.5 * total * x[1] * x[1] + m * l * x[1] * x[3] * std::cos(x[2]) +
         0.5 * (4.0 / 3.0) * m * l * l * x[3] * x[3] +
         m * cfg.gravity * l * std::cos(x[2]);
}

}  // namespace hbo
