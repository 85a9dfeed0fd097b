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

#include "ksdd/flows.hpp"
#include "ksdd/stein.hpp"
#include "ksdd/targets.hpp"

#include <cstdint>

namespace ksdd {

struct SteinIdentityResult {
  double mean = 0.0;
  double std_error = 0.0;
  bool pass = false;
};

/// Monte-Carlo estimate of E_{X ~ pi} k_pi(X, y) from exact draws of the
/// target. Passes when |mean| < 4 * std_error. Throws UnsupportedError when
/// the model cannot sample and InputError when n_samples < 1.
SteinIdentityResult stein_identity_check(const SteinKernel& sk, PointRef y, Index n_samples,
                                         std::uint64_t seed);

/// Amari index of M = A B^{-1}, normalized by 2p(p-1) into [0, 1]. Zero iff
/// A and B agree up to row scaling (sign included) and permutation. Throws
/// SingularError when B is singular.
double amari_distance(const Matrix& a, const Matrix& b);

/// max_i |<x_i, n> - offset| with n normalized to unit length. Throws
/// InputError on a zero normal or dimension mismatch.
double symmetry_residual(const Positions& particles, PointRef normal, double offset);

/// V-statistic KSD of the empirical measure: sqrt(max(0, 2 * ksd_loss)).
double ksd_between(const SteinKernel& sk, const Positions& particles);

/// V-statistic MMD^2 between two point sets under the base kernel.
double mmd2_between(const BaseKernel& kernel, const Positions& x, const Positions& y);

/// Model-averaged logistic prediction: the probability of class +1 is the
/// particle mean of sigmoid(w . f); probability >= 1/2 predicts +1. Particle
/// coordinates are [w, log alpha]; the last coordinate is ignored.
double logreg_accuracy(const Positions& particles, const LabeledDataset& test);

}  // namespace ksdd
