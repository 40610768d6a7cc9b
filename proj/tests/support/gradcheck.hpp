// Copyright 2026 The asrbench Authors
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

// Central finite-difference oracle shared by the unit and acceptance suites.
// It only ever calls the forward path of the code under test.

#include <algorithm>
#include <cmath>
#include <random>

#include "asrbench/nn/tensor.hpp"

namespace asrbench::testing {

using nn::Matrix;

inline constexpr double kFiniteDiffStep = 1e-5;

/// Entries whose analytic and numeric magnitudes both fall below this floor
/// are compared on an absolute scale; cancellation noise in the numeric
/// difference sits around 1e-11 for the loss magnitudes used here.
inline constexpr double kRelativeFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeFloor});
  return std::abs(analytic - numeric) / scale;
}

/// Perturbs every entry of `target` by +/-h, evaluates `loss` and compares
/// the central difference with `analytic`. Returns the worst relative error.
template <class LossFn>
double max_gradient_error(Matrix& target, const Matrix& analytic, LossFn&& loss,
                          double h = kFiniteDiffStep) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double saved = target.data()[i];
    target.data()[i] = saved + h;
    const double up = loss();
    target.data()[i] = saved - h;
    const double down = loss();
    target.data()[i] = saved;
    worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

template <class Derived, class LossFn>
double max_gradient_error_vec(Eigen::PlainObjectBase<Derived>& target,
                              const Eigen::PlainObjectBase<Derived>& analytic, LossFn&& loss,
                              double h = kFiniteDiffStep) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double saved = target.data()[i];
    target.data()[i] = saved + h;
    const double up = loss();
    target.data()[i] = saved - h;
    const double down = loss();
    target.data()[i] = saved;
    worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2 * h)));
  }
  return worst;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

/// Weighted-sum projection used as the scalar loss: L = sum(out .* weights).
inline double project(const Matrix& out, const Matrix& weights) {
  return out.cwiseProduct(weights).sum();
}

}  // namespace asrbench::testing
