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

#include <doctest.h>

#include <algorithm>
#include <random>

using namespace ksdd;

TEST_CASE("amari distance examples") {
  const Matrix id = Matrix::Identity(2, 2);
  CHECK(amari_distance(id, id) == 0.0);
  const Matrix b = Matrix::Ones(2, 2) + id;
  // M = B^{-1} = [[2, -1], [-1, 2]] / 3: every row and column contributes 1/2.
  CHECK(amari_distance(id, b) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(amari_distance(id, Matrix::Ones(2, 2)), SingularError);
  CHECK(amari_distance(Matrix::Constant(1, 1, 3.0), Matrix::Constant(1, 1, -2.0)) == 0.0);
}

TEST_CASE("amari distance is zero for scale and permutation") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (Index p : {2, 3, 5}) {
    Matrix b(p, p);
    for (Index i = 0; i < b.size(); ++i) b.data()[i] = n(rng);
    Vector scale = Vector::LinSpaced(p, 3.0, -2.0);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(p);
    perm.setIdentity();
    std::shuffle(perm.indices().data(), perm.indices().data() + p, rng);
    const Matrix a = scale.asDiagonal() * (perm * b);
    CHECK(amari_distance(a, b) < 1e-12);
    Matrix c(p, p);
    for (Index i = 0; i < c.size(); ++i) c.data()[i] = n(rng);
    const double d = amari_distance(c, b);
    CHECK(d > 0.0);
    CHECK(d <= 1.0);
    CHECK(amari_distance(c, b) == d);
  }
}

TEST_CASE("symmetry residual") {
  Positions on(3, 2);
  on << 0.0, 1.0, 0.0, -2.0, 0.0, 5.0;
  const Vector nrm = (Vector(2) << 1.0, 0.0).finished();
  CHECK(symmetry_residual(on, nrm, 0.0) == 0.0);
  Positions one(1, 2);
  one << 0.3, 4.0;
  CHECK(symmetry_residual(one, nrm, 0.0) == doctest::Approx(0.3));
  CHECK(symmetry_residual(one, 2.0 * nrm, 0.0) == doctest::Approx(0.3));
  Positions shifted = on;
  shifted.col(1).array() += 7.5;
  CHECK(symmetry_residual(shifted, nrm, 0.0) == symmetry_residual(on, nrm, 0.0));
  CHECK_THROWS_AS(symmetry_residual(on, Vector::Zero(2), 0.0), InputError);
  CHECK_THROWS_AS(symmetry_residual(on, Vector::Ones(3), 0.0), InputError);
}

TEST_CASE("ksd_between squared is twice the loss") {
  const SteinKernel sk(BaseKernel::gaussian(1.0), std::make_shared<BananaModel>());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Positions p(7, 2);
  for (Index i = 0; i < p.size(); ++i) p.data()[i] = n(rng);
  const double loss = ksd_loss(evaluate_particles(sk, p, false));
  const double k = ksd_between(sk, p);
  CHECK(std::abs(k * k - 2.0 * loss) < 1e-12);
}

TEST_CASE("ksd of exact samples shrinks with N") {
  const auto g = GaussianModel::standard(2);
  const SteinKernel sk(BaseKernel::gaussian(1.0), g);
  auto median_ksd = [&](Index n) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      std::mt19937_64 rng(seed);
      Positions p(n, 2);
      for (Index i = 0; i < n; ++i) p.row(i) = g->sample(rng).transpose();
      v.push_back(ksd_between(sk, p));
    }
    std::nth_element(v.begin(), v.begin() + 5, v.end());
    return v[5];
  };
  CHECK(median_ksd(1000) < median_ksd(100));
}

TEST_CASE("mmd2 between point sets") {
  const BaseKernel k = BaseKernel::gaussian(1.0);
  Positions x(2, 1), y(1, 1);
  x << 0.0, 1.0;
  y << 0.0;
  const double e = std::exp(-0.5);
  // (1/4)(1 + 1 + 2e) + 1 - (2/2)(1 + e)
  CHECK(mmd2_between(k, x, y) == doctest::Approx(0.5 + 0.5 * e + 1.0 - 1.0 - e).epsilon(1e-14));
  CHECK(mmd2_between(k, x, x) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("stein identity check") {
  const SteinKernel sk(BaseKernel::gaussian(1.0), GaussianModel::standard(2));
  const Vector y = (Vector(2) << 0.5, 0.5).finished();
  const auto r = stein_identity_check(sk, y, 100000, 1);
  CHECK(r.pass);
  CHECK(r.std_error > 0.0);
  CHECK_THROWS_AS(stein_identity_check(sk, y, 0, 1), InputError);
  const SteinKernel mix(BaseKernel::gaussian(1.0), GaussianMixtureModel::symmetric_pair(2, 1.0, 0.5));
  CHECK(stein_identity_check(mix, y, 20000, 2).pass);
  LabeledDataset d{Matrix::Ones(1, 1), Vector::Ones(1)};
  const SteinKernel lr(BaseKernel::gaussian(1.0), std::make_shared<LogisticPosterior>(d));
  CHECK_THROWS_AS(stein_identity_check(lr, Vector::Zero(2), 10, 1), UnsupportedError);
}

TEST_CASE("logistic accuracy") {
  LabeledDataset test;
  test.features.resize(5, 2);
  test.features << 1.0, 0.5, -1.0, 0.2, 0.3, -2.0, -0.4, -0.4, 2.0, 1.0;
  test.labels = (Vector(5) << 1, -1, -1, 1, 1).finished();
  Positions particles(3, 3);
  particles << 1.0, 0.5, 9.0, -0.5, 2.0, -3.0, 0.2, 0.1, 0.0;
  int correct = 0;
  for (Index t = 0; t < 5; ++t) {
    double prob = 0.0;
    for (Index j = 0; j < 3; ++j) {
      const double z = particles(j, 0) * test.features(t, 0) + particles(j, 1) * test.features(t, 1);
      prob += 1.0 / (1.0 + std::exp(-z)) / 3.0;
    }
    correct += ((prob >= 0.5 ? 1.0 : -1.0) == test.labels(t));
  }
  CHECK(logreg_accuracy(particles, test) == doctest::Approx(correct / 5.0));
  // w = 0 predicts +1 everywhere: the accuracy is the rate of class +1.
  CHECK(logreg_accuracy(Positions::Zero(1, 3), test) == doctest::Approx(0.6));
  CHECK_THROWS_AS(logreg_accuracy(Positions::Zero(1, 2), test), InputError);
}
