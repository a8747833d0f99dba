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

#include "hbo/core.hpp"

namespace hbo::gp {

/// Constants of the kernelized-bandit confidence bound:
/// |mu(xi) - f(xi)| <= beta * sqrt(var(xi)) with probability >= 1 - delta'.
struct CalibrationConfig {
  double rkhs_bound = 1.0;        // B
  double noise_subgaussian = 0.0; // R
  double info_gain = 0.0;         // gamma
  double confidence = 0.05;       // delta'
};

/// beta(delta') = B + R * sqrt(gamma + 1 + ln(1 / delta')).
inline double calibration_beta(const CalibrationConfig& cfg) {
  if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) {
    throw InvalidArgument("calibration_beta: confidence must lie in (0, 1)");
  }
  require(std::isfinite(cfg.rkhs_bound) && cfg.rkhs_bound >= 0.0,
          "calibration_beta: RKHS bound must be finite and nonnegative");
  require(std::isfinite(cfg.noise_subgaussian) && cfg.noise_subgaussian >= 0.0,
          "calibration_beta: sub-Gaussian constant must be nonnegative");
  require(std::isfinite(cfg.info_gain) && cfg.info_gain >= 0.0,
          "calibration_beta: information gain must be nonnegative");
  return cfg.rkhs_bound +
         cfg.noise_subgaussian *
             std::sqrt(cfg.info_gain + 1.0 + std::log(1.0 / cfg.confidence));
}

/// Per-output confidence so that M independent outputs hold jointly with
/// probability 1 - delta: delta' = 1 - (1 - delta)^(1/M).
inline double per_output_confidence(double delta, int outputs) {
  require(delta > 0.0 && delta < 1.0, "per_output_confidence: delta in (0,1)");
  require(outputs >= 1, "per_output_confidence: need at least one output");
  return -std::expm1(std::log1p(-delta) / outputs);
}

}  // namespace hbo::gp
