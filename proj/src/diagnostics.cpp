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

#include "ksdd/diagnostics.hpp"

#include "ksdd/errors.hpp"

#include <cmath>
#include <random>

namespace ksdd {

SteinIdentityResult stein_identity_check(const SteinKernel& sk, PointRef y, Index n_samples,
                                         std::uint64_t seed) {
  if (n_samples < 1) throw InputError("stein_identity_check: need at least one sample");
  const ScoreModel& model = *sk.model();
  if (!model.can_sample()) throw UnsupportedError("stein_identity_check: model cannot sample");
  require_dim(y, model.dim(), "stein_identity_check");
  std::mt19937_64 rng(seed);
  const Vector sy = model.score(y);
  // Welford accumulation keeps the variance accurate for large n.
  double mean = 0.0;
  double m2 = 0.0;
  for (Index i = 0; i < n_samples; ++i) {
    const Vector x = model.sample(rng);
    const double v = sk.kpi_cached(x, y, model.score(x), sy);
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  SteinIdentityResult r;
  r.mean = mean;
  const double var = n_samples > 1 ? m2 / static_cast<double>(n_samples - 1) : 0.0;
  r.std_error = std::sqrt(var / static_cast<double>(n_samples));
  r.pass = std::abs(mean) < 4.0 * r.std_error;
  return r;
}

double amari_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw InputError("amari_distance: need two square matrices of equal size");
  }
  const Index p = a.rows();
  if (p == 0) throw InputError("amari_distance: empty matrices");
  Eigen::FullPivLU<Matrix> lu(b);
  if (!lu.isInvertible()) throw SingularError("amari_distance: B is singular");
  if (p == 1) return 0.0;
  const Matrix m = (a * lu.inverse()).cwiseAbs();
  double total = 0.0;
  for (Index i = 0; i < p; ++i) total += m.row(i).sum() / m.row(i).maxCoeff() - 1.0;
  for (Index j = 0; j < p; ++j) total += m.col(j).sum() / m.col(j).maxCoeff() - 1.0;
  const auto pd = static_cast<double>(p);
  return total / (2.0 * pd * (pd - 1.0));
}

double symmetry_residual(const Positions& particles, PointRef normal, double offset) {
  if (normal.size() != particles.cols()) throw InputError("symmetry_residual: normal dimension mismatch");
  const double len = normal.norm();
  if (!(len > 0.0)) throw InputError("symmetry_residual: zero normal");
  const Vector n = normal / len;
  double worst = 0.0;
  for (Index i = 0; i < particles.rows(); ++i) {
    worst = std::max(worst, std::abs(particles.row(i).dot(n.transpose()) - offset));
  }
  return worst;
}

double ksd_between(const SteinKernel& sk, const Positions& particles) {
  return std::sqrt(std::max(0.0, 2.0 * ksd_loss(evaluate_particles(sk, particles, false))));
}

double mmd2_between(const BaseKernel& kernel, const Positions& x, const Positions& y) {
  if (x.rows() == 0 || y.rows() == 0) throw InputError("mmd2_between: empty point set");
  if (x.cols() != y.cols()) throw InputError("mmd2_between: dimension mismatch");
  auto mean_kernel = [&](const Positions& a, const Positions& b) {
    double s = 0.0;
    for (Index i = 0; i < a.rows(); ++i) {
      for (Index j = 0; j < b.rows(); ++j) s += kernel.eval(a.row(i).transpose(), b.row(j).transpose());
    }
    return s / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  };
  return mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
}

double logreg_accuracy(const Positions& particles, const LabeledDataset& test) {
  test.validate();
  if (test.size() == 0) throw InputError("logreg_accuracy: empty test set");
  if (particles.rows() == 0) throw InputError("logreg_accuracy: no particles");
  if (particles.cols() != test.num_features() + 1) {
    throw InputError("logreg_accuracy: particle dimension must be features + 1");
  }
  const Index p = test.num_features();
  const Matrix logits = test.features * particles.leftCols(p).transpose();  // q x N
  Index correct = 0;
  for (Index i = 0; i < test.size(); ++i) {
    double prob = 0.0;
    for (Index k = 0; k < particles.rows(); ++k) prob += 1.0 / (1.0 + std::exp(-logits(i, k)));
    prob /= static_cast<double>(particles.rows());
    const double predicted = prob >= 0.5 ? 1.0 : -1.0;
    if (predicted == test.labels(i)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace ksdd
