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
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "hbo/core.hpp"
#include "hbo/gp/multi_output.hpp"
#include "hbo/random.hpp"

namespace hbo::bo {

/// mu - beta * sqrt(var).
inline double lcb(const gp::Prediction& p, double beta) {
  require(beta >= 0.0, "lcb: beta must be nonnegative");
  return p.mean - beta * std::sqrt(std::max(0.0, p.variance));
}

inline double lcb(const Vector& theta, const gp::ScaledGp& posterior,
                  double beta) {
  return lcb(posterior.predict(theta), beta);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// E[max(best - f, 0)] for f ~ N(mean, var) (minimization).
inline double expected_improvement(const gp::Prediction& p, double best) {
  const double sd = std::sqrt(std::max(0.0, p.variance));
  const double gain = best - p.mean;
  if (sd < 1e-12) return std::max(gain, 0.0);
  const double z = gain / sd;
  return std::max(0.0, gain * normal_cdf(z) + sd * normal_pdf(z));
}

inline double expected_improvement(const Vector& theta,
                                   const gp::ScaledGp& posterior, double best) {
  return expected_improvement(posterior.predict(theta), best);
}

/// Radical-inverse (Halton) point `index` (1-based) in the unit cube.
inline Vector halton_point(std::uint64_t index, int dim) {
  static constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29,
                                    31, 37, 41, 43, 47, 53, 59, 61, 67, 71};
  require(dim <= static_cast<int>(std::size(kPrimes)), "halton: dimension too large");
  Vector out(dim);
  for (int j = 0; j < dim; ++j) {
    const std::uint64_t base = static_cast<std::uint64_t>(kPrimes[j]);
    double f = 1.0, r = 0.0;
    for (std::uint64_t i = index; i > 0; i /= base) {
      f /= static_cast<double>(base);
      r += f * static_cast<double>(i % base);
    }
    out[j] = r;
  }
  return out;
}

struct AcquisitionSettings {
  int restarts = 64;       // quasi-random probe points
  int local_steps = 16;    // coordinate-search sweeps per refined start
  int refine_starts = 2;   // best probes that get local refinement
  double initial_step = 0.1;  // fraction of the box width
  double min_step = 1e-7;
};

struct AcquisitionResult {
  Vector point;
  double value = std::numeric_limits<double>::infinity();
  bool flat = false;
  int evaluations = 0;
};

namespace detail {

inline bool lex_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(),
                                      b.data() + b.size());
}

// Strictly better value, or equal value and lexicographically smaller point.
inline bool better(double va, const Vector& a, double vb, const Vector& b) {
  if (va < vb) return true;
  if (vb < va) return false;
  return lex_less(a, b);
}

}  // namespace detail

/// Index of the best candidate; ties go to the lexicographically smallest
/// point, so the choice does not depend on candidate order.
inline std::size_t select_best(const std::vector<Vector>& points,
                               const std::vector<double>& values) {
  require(!points.empty() && points.size() == values.size(),
          "select_best: need matching, nonempty candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (detail::better(values[i], points[i], values[best], points[best])) best = i;
  }
  return best;
}

/// Minimizes `acquisition` over `bounds`: evaluates `restarts` Halton points
/// (randomly rotated by `rng`) plus `extra_starts`, then runs coordinate
/// pattern search from the best `refine_starts` of them. Non-finite values
/// count as +inf.
inline AcquisitionResult optimize_acquisition(
    const std::function<double(const Vector&)>& acquisition, const Box& bounds,
    const AcquisitionSettings& settings, Rng& rng,
    const std::vector<Vector>& extra_starts = {}) {
  require(bounds.bounded(), "optimize_acquisition: bounds must be ordered");
  require(settings.restarts >= 1 || !extra_starts.empty(),
          "optimize_acquisition: no starting points");
  const int dim = static_cast<int>(bounds.dim());
  const Vector width = bounds.upper - bounds.lower;
  AcquisitionResult res;
  auto eval = [&](const Vector& x) {
    ++res.evaluations;
    double v = acquisition(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };

  Vector shift(dim);
  for (int j = 0; j < dim; ++j) shift[j] = rng.uniform();
  std::vector<Vector> points;
  std::vector<double> values;
  for (int i = 0; i < settings.restarts; ++i) {
    Vector u = halton_point(static_cast<std::uint64_t>(i) + 1, dim) + shift;
    u = u.array() - u.array().floor();
    points.push_back(bounds.lower + (u.array() * width.array()).matrix());
  }
  for (const Vector& x : extra_starts) points.push_back(bounds.clamp(x));
  for (const Vector& x : points) values.push_back(eval(x));

  const double vmin = *std::min_element(values.begin(), values.end());
  const double vmax = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(vmin)) {
    throw NumericalFailure("optimize_acquisition: acquisition non-finite at all " +
                           std::to_string(points.size()) + " probes");
  }
  res.flat = vmax == vmin;

  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detail::better(values[a], points[a], values[b], points[b]);
  });
  res.point = points[order.front()];
  res.value = values[order.front()];
  if (res.flat) return res;

  const int n_refine =
      std::min<int>(settings.refine_starts, static_cast<int>(order.size()));
  for (int s = 0; s < n_refine; ++s) {
    Vector x = points[order[static_cast<std::size_t>(s)]];
    double fx = values[order[static_cast<std::size_t>(s)]];
    if (!std::isfinite(fx)) continue;
    Vector step = settings.initial_step * width;
    for (int sweep = 0; sweep < settings.local_steps; ++sweep) {
      if (step.maxCoeff() < settings.min_step) break;
      bool improved = false;
      for (int j = 0; j < dim; ++j) {
        if (width[j] <= 0.0) continue;
        for (double sign : {1.0, -1.0}) {
          Vector cand = x;
          cand[j] = std::clamp(x[j] + sign * step[j], bounds.lower[j], bounds.upper[j]);
          if (cand[j] == x[j]) continue;
          double fc = eval(cand);
          if (fc < fx) {
            x = std::move(cand);
            fx = fc;
            improved = true;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    if (detail::better(fx, x, res.value, res.point)) {
      res.point = x;
      res.value = fx;
    }
  }
  return res;
}

}  // namespace hbo::bo
