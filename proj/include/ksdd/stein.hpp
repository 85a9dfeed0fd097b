// Copyright 2026 The ksdd Authors
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

#include "ksdd/kernel.hpp"
#include "ksdd/targets.hpp"

#include <array>
#include <vector>

namespace ksdd {

/// The six terms of grad_y k_pi(x, y), in assembly order:
///   0: s(x)^T s(y) grad2 k
///   1: Js(y)^T s(x) k
///   2: H2 k s(x)
///   3: Js(y)^T grad1 k
///   4: (d^2 k / dx dy)^T s(y)
///   5: grad2 (div1 grad2 k)
using SteinGradientTerms = std::array<Vector, 6>;

/// Stein kernel
///   k_pi(x, y) = s(x)^T s(y) k + s(x)^T grad2 k + s(y)^T grad1 k + div1 grad2 k.
class SteinKernel {
 public:
  SteinKernel(BaseKernel base, ModelPtr model);

  const BaseKernel& base() const { return base_; }
  const ModelPtr& model() const { return model_; }
  Index dim() const { return model_->dim(); }

  double kpi(PointRef x, PointRef y) const;
  Vector grad2_kpi(PointRef x, PointRef y) const;
  Vector grad1_kpi(PointRef x, PointRef y) const { return grad2_kpi(y, x); }
  SteinGradientTerms grad2_kpi_terms(PointRef x, PointRef y) const;

  /// Evaluation from precomputed scores (sx = s(x), sy = s(y)).
  double kpi_cached(PointRef x, PointRef y, PointRef sx, PointRef sy) const;
  /// Evaluation from precomputed scores and the Jacobian jy = Js(y).
  Vector grad2_kpi_cached(PointRef x, PointRef y, PointRef sx, PointRef sy, const Matrix& jy) const;

 private:
  BaseKernel base_;
  ModelPtr model_;
};

/// Pairwise Stein-kernel values and gradients over a particle set.
///
/// `gram(i, j) = k_pi(x_i, x_j)`. `grad(j, i)` is grad2 k_pi(x_j, x_i), with
/// j the source particle and i the evaluation particle.
struct SteinEvaluation {
  Index n = 0;
  Index d = 0;
  Matrix gram;
  std::vector<double> grad_gram;  // n * n * d, empty when gradients were not requested

  bool has_gradient() const { return !grad_gram.empty(); }
  Eigen::Map<const Vector> grad(Index source, Index eval) const {
    return {grad_gram.data() + (source * n + eval) * d, d};
  }
  Eigen::Map<Vector> grad(Index source, Index eval) {
    return {grad_gram.data() + (source * n + eval) * d, d};
  }
};

/// O(N^2 d) pairwise evaluation. Scores (and Jacobians when gradients are
/// requested) are computed once per particle.
SteinEvaluation evaluate_particles(const SteinKernel& sk, const Positions& particles,
                                   bool with_gradient = true);

}  // namespace ksdd
