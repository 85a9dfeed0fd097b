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

#include "ksdd/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ksdd {

/// Smooth objective over a flat coordinate vector. `eval` returns the value
/// and writes the gradient into its second argument (already sized to dim).
struct Objective {
  std::function<double(const Vector&, Vector&)> eval;
  Index dim = 0;
};

struct LbfgsConfig {
  int memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  /// Stop when the max-norm of the gradient falls below this value.
  double tol_grad = 1e-10;
  int max_iters = 1000;
  /// Function evaluations allowed per line search.
  int max_line_search = 25;

  void validate() const;
};

struct IterationRecord {
  int iteration = 0;
  double value = 0.0;
  double grad_norm_inf = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  int evaluations = 0;
  /// Both strong Wolfe conditions held at the accepted step.
  bool strong_wolfe = false;
  /// The step came from the steepest-descent backtracking fallback.
  bool fallback = false;
};

enum class OptimStatus { Converged, MaxIters, LineSearchFailed, Diverged };

std::string to_string(OptimStatus status);

struct OptimResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  int evaluations = 0;
  OptimStatus status = OptimStatus::MaxIters;
  std::vector<IterationRecord> trace;
};

using IterationCallback = std::function<void(const IterationRecord&, const Vector& x)>;

/// Limited-memory BFGS. Two-loop recursion with initial scaling
/// gamma_k = s^T y / y^T y; step lengths from a bracketing + zoom line search
/// (cubic interpolation, bisection safeguard) enforcing the strong Wolfe
/// conditions. When the line search fails the iteration retries along the
/// steepest-descent direction with Armijo backtracking and clears the
/// memory; if that fails too, the best point so far is returned with
/// `LineSearchFailed`.
OptimResult lbfgs_minimize(const Objective& obj, const Vector& x0, const LbfgsConfig& cfg,
                           const IterationCallback& on_iteration = {});

/// Fixed-step gradient descent x <- x - step * grad f(x). Stops when the
/// max-norm of the gradient drops below `tol`; reports `Diverged` as soon as
/// a value or gradient is non-finite.
OptimResult gd_minimize(const Objective& obj, const Vector& x0, double step, int max_iters,
                        double tol, const IterationCallback& on_iteration = {});

}  // namespace ksdd
