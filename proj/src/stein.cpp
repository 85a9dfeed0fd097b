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

#include "ksdd/stein.hpp"

#include "ksdd/errors.hpp"

namespace ksdd {

SteinKernel::SteinKernel(BaseKernel base, ModelPtr model)
    : base_(std::move(base)), model_(std::move(model)) {
  if (!model_) throw InputError("stein kernel: null model");
}

double SteinKernel::kpi(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kpi");
  return kpi_cached(x, y, model_->score(x), model_->score(y));
}

Vector SteinKernel::grad2_kpi(PointRef x, PointRef y) const {
  require_same_dim(x, y, "grad2_kpi");
  return grad2_kpi_cached(x, y, model_->score(x), model_->score(y), model_->score_jacobian(y));
}

double SteinKernel::kpi_cached(PointRef x, PointRef y, PointRef sx, PointRef sy) const {
  const Vector u = x - y;
  const double r = u.squaredNorm();
  const RadialProfile p = base_.profile(r);
  const auto d = static_cast<double>(u.size());
  // s(x).grad2 k + s(y).grad1 k collapses to 2 phi' u.(s(y) - s(x)).
  return p.phi * sx.dot(sy) + 2.0 * p.d1 * u.dot(sy - sx) - 2.0 * d * p.d1 - 4.0 * r * p.d2;
}

Vector SteinKernel::grad2_kpi_cached(PointRef x, PointRef y, PointRef sx, PointRef sy,
                                     const Matrix& jy) const {
  const Vector u = x - y;
  const double r = u.squaredNorm();
  const RadialProfile p = base_.profile(r);
  const auto d = static_cast<double>(u.size());

  // Terms 2 and 4 share H = 2 phi' I + 4 phi'' u u^T, with the mixed block
  // equal to -H, giving H (s(x) - s(y)).
  const Vector ds = sx - sy;
  Vector g = jy.transpose() * (p.phi * sx + (2.0 * p.d1) * u);
  g += (2.0 * p.d1) * ds;
  g += (4.0 * p.d2 * u.dot(ds) - 2.0 * p.d1 * sx.dot(sy) +
        2.0 * ((4.0 + 2.0 * d) * p.d2 + 4.0 * r * p.d3)) *
       u;
  return g;
}

SteinGradientTerms SteinKernel::grad2_kpi_terms(PointRef x, PointRef y) const {
  require_same_dim(x, y, "grad2_kpi_terms");
  const Vector sx = model_->score(x);
  const Vector sy = model_->score(y);
  const Matrix jy = model_->score_jacobian(y);
  const double k = base_.eval(x, y);
  return {sx.dot(sy) * base_.grad2(x, y),
          jy.transpose() * sx * k,
          base_.hess2(x, y) * sx,
          jy.transpose() * base_.grad1(x, y),
          base_.cross_hess(x, y).transpose() * sy,
          base_.grad2_div1_grad2(x, y)};
}

SteinEvaluation evaluate_particles(const SteinKernel& sk, const Positions& particles,
                                   bool with_gradient) {
  const Index n = particles.rows();
  const Index d = particles.cols();
  if (n < 1) throw InputError("evaluate_particles: empty particle set");
  if (d != sk.dim()) throw InputError("evaluate_particles: particle dimension differs from model");
  if (!particles.allFinite()) throw InputError("evaluate_particles: non-finite particle coordinates");

  std::vector<Vector> scores(static_cast<std::size_t>(n));
  std::vector<Matrix> jacobians;
  for (Index i = 0; i < n; ++i) scores[static_cast<std::size_t>(i)] = sk.model()->score(particles.row(i).transpose());
  if (with_gradient) {
    jacobians.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
      jacobians[static_cast<std::size_t>(i)] = sk.model()->score_jacobian(particles.row(i).transpose());
    }
  }

  SteinEvaluation ev;
  ev.n = n;
  ev.d = d;
  ev.gram.resize(n, n);
  for (Index i = 0; i < n; ++i) {
    const auto xi = particles.row(i).transpose();
    const auto& si = scores[static_cast<std::size_t>(i)];
    for (Index j = i; j < n; ++j) {
      const double v = sk.kpi_cached(xi, particles.row(j).transpose(), si, scores[static_cast<std::size_t>(j)]);
      ev.gram(i, j) = v;
      ev.gram(j, i) = v;
    }
  }
  if (with_gradient) {
    ev.grad_gram.assign(static_cast<std::size_t>(n * n * d), 0.0);
    for (Index j = 0; j < n; ++j) {
      const auto xj = particles.row(j).transpose();
      const auto& sj = scores[static_cast<std::size_t>(j)];
      for (Index i = 0; i < n; ++i) {
        ev.grad(j, i) = sk.grad2_kpi_cached(xj, particles.row(i).transpose(), sj,
                                            scores[static_cast<std::size_t>(i)],
                                            jacobians[static_cast<std::size_t>(i)]);
      }
    }
  }
  return ev;
}

}  // namespace ksdd
