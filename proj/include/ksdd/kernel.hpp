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

#include <cstdint>
#include <string>
#include <vector>

namespace ksdd {

enum class KernelFamily { GaussianRBF, IMQ };

/// Radial profile k(x, y) = phi(r) with r = |x - y|^2, together with the
/// first three derivatives of phi with respect to r.
struct RadialProfile {
  double phi = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d3 = 0.0;
};

/// Smooth translation-invariant positive-definite kernel.
///
/// GaussianRBF: k(x, y) = exp(-|x - y|^2 / (2 sigma^2)).
/// IMQ:         k(x, y) = (c^2 + |x - y|^2)^beta with beta in (-1, 0).
///
/// All derivatives are closed forms in terms of the radial profile. With
/// u = x - y the building blocks are
///   grad1 k        =  2 phi' u
///   grad2 k        = -2 phi' u
///   hess1 = hess2  =  2 phi' I + 4 phi'' u u^T
///   d2k/dx_a dy_b  = -(2 phi' I + 4 phi'' u u^T)_ab
///   div1 grad2 k   = -2 d phi' - 4 r phi''
///   grad2 (div1 grad2 k) = 2 u ((4 + 2d) phi'' + 4 r phi''').
class BaseKernel {
 public:
  static BaseKernel gaussian(double bandwidth);
  static BaseKernel imq(double c, double beta);

  KernelFamily family() const { return family_; }
  double bandwidth() const { return bandwidth_; }
  double imq_c() const { return imq_c_; }
  double imq_beta() const { return imq_beta_; }
  std::string describe() const;

  RadialProfile profile(double r) const;

  double eval(PointRef x, PointRef y) const;
  Vector grad1(PointRef x, PointRef y) const;
  Vector grad2(PointRef x, PointRef y) const;
  Matrix hess1(PointRef x, PointRef y) const;
  Matrix hess2(PointRef x, PointRef y) const;
  /// Mixed second derivatives, entry (a, b) = d^2 k / dx_a dy_b.
  Matrix cross_hess(PointRef x, PointRef y) const;
  double div1_grad2(PointRef x, PointRef y) const;
  Vector grad2_div1_grad2(PointRef x, PointRef y) const;

  /// k(x, x); constant for translation-invariant kernels.
  double diagonal() const { return profile(0.0).phi; }

  /// N x N Gram matrix over the rows of `points`.
  Matrix gram(const Positions& points) const;

 private:
  BaseKernel(KernelFamily family, double bandwidth, double c, double beta);

  KernelFamily family_;
  double bandwidth_;
  double imq_c_;
  double imq_beta_;
};

/// Median of the pairwise Euclidean distances between the rows of `points`.
/// Returns 1 when fewer than two distinct points are available.
double median_heuristic_bandwidth(const Positions& points);

struct FdCheckEntry {
  std::string derivative;
  double max_rel_error = 0.0;
};

struct FdCheckReport {
  std::vector<FdCheckEntry> entries;
  int samples = 0;
  double step = 0.0;

  double worst() const;
  bool passed(double tolerance) const { return worst() < tolerance; }
};

/// Compares every analytic derivative against central finite differences on
/// `samples` random point pairs with coordinates uniform in [-3, 3] and
/// dimension uniform in {1, ..., 5}. The relative error of a vector or
/// matrix is |analytic - fd|_max / max(|fd|_max, 1e-8).
FdCheckReport fd_check(const BaseKernel& kernel, int samples, double step, std::uint64_t seed);

}  // namespace ksdd
