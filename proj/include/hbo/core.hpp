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
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace hbo {

inline constexpr int kStateDim = 4;
inline constexpr int kInputDim = 1;
inline constexpr int kParamDim = 5;
// z = (x_{k+1}, u_k)
inline constexpr int kStageDim = kStateDim + kInputDim;
// (x_k, log10 theta)
inline constexpr int kFeatureDim = kStateDim + kParamDim;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using State = Eigen::Matrix<double, kStateDim, 1>;
using StageVector = Eigen::Matrix<double, kStageDim, 1>;
using FeatureVector = Eigen::Matrix<double, kFeatureDim, 1>;

// Error taxonomy shared by every module.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

inline void require(bool condition, const std::string& what) {
  if (!condition) throw InvalidArgument(what);
}

// Axis-aligned box, used for search spaces and Lipschitz regions.
struct Box {
  Vector lower;
  Vector upper;

  Eigen::Index dim() const { return lower.size(); }

  bool bounded() const {
    return lower.size() == upper.size() && lower.allFinite() &&
           upper.allFinite() && (upper.array() >= lower.array()).all();
  }

  Box inflated(double fraction) const {
    Vector half = 0.5 * (upper - lower) * fraction;
    return {lower - half, upper + half};
  }

  Vector clamp(const Vector& v) const {
    return v.cwiseMax(lower).cwiseMin(upper);
  }

  // Smallest box containing every column.
  static Box bounding(const Matrix& columns) {
    require(columns.cols() > 0, "bounding box of an empty point set");
    return {columns.rowwise().minCoeff(), columns.rowwise().maxCoeff()};
  }
};

}  // namespace hbo
