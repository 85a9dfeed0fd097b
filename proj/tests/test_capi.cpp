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

// Exercises the shared library through its C interface only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "ksdd/ksdd.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

TEST_CASE("version and status strings") {
  CHECK(std::strlen(ksdd_version()) > 0);
  CHECK(std::string(ksdd_status_string(KSDD_OK)) == "ok");
  CHECK(std::strlen(ksdd_status_string(KSDD_ERR_SINGULAR)) > 0);
}

TEST_CASE("kernel and model handles") {
  ksdd_kernel* k = nullptr;
  REQUIRE(ksdd_kernel_create_gaussian(1.0, &k) == KSDD_OK);
  const double x[2] = {0.0, 0.0};
  const double y[2] = {1.0, 1.0};
  double v = 0.0;
  REQUIRE(ksdd_kernel_eval(k, x, y, 2, &v) == KSDD_OK);
  CHECK(v == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

  ksdd_kernel* bad = nullptr;
  CHECK(ksdd_kernel_create_gaussian(-1.0, &bad) == KSDD_ERR_CONFIG);
  CHECK(bad == nullptr);
  CHECK(std::strlen(ksdd_last_error()) > 0);
  CHECK(ksdd_kernel_eval(k, nullptr, y, 2, &v) == KSDD_ERR_INPUT);

  const double mean[2] = {0.0, 0.0};
  const double cov[4] = {1.0, 0.0, 0.0, 1.0};
  ksdd_model* m = nullptr;
  REQUIRE(ksdd_model_create_gaussian(mean, cov, 2, &m) == KSDD_OK);
  CHECK(ksdd_model_dim(m) == 2);
  double s[2];
  REQUIRE(ksdd_model_score(m, y, s) == KSDD_OK);
  CHECK(s[0] == -1.0);
  CHECK(s[1] == -1.0);

  // k_pi(x, x) = |s(x)|^2 + d / sigma^2 for the Gaussian kernel.
  double kpi = 0.0;
  REQUIRE(ksdd_stein_kernel_eval(k, m, y, y, &kpi) == KSDD_OK);
  CHECK(kpi == doctest::Approx(4.0).epsilon(1e-14));

  const double singular[4] = {1.0, 1.0, 1.0, 1.0};
  ksdd_model* ica = nullptr;
  CHECK(ksdd_model_create_gaussian(mean, singular, 2, &ica) != KSDD_OK);
  ksdd_model* mix = nullptr;
  REQUIRE(ksdd_model_create_mixture_pair(2, 1.0, 0.1, &mix) == KSDD_OK);
  REQUIRE(ksdd_model_score(mix, x, s) == KSDD_OK);
  CHECK(std::abs(s[0]) < 1e-15);
  ksdd_model_destroy(mix);
  ksdd_model* banana = nullptr;
  REQUIRE(ksdd_model_create_banana(2.0, 0.2, &banana) == KSDD_OK);
  ksdd_model_destroy(banana);
  const double feats[4] = {1.0, 0.0, 0.0, 1.0};
  const double labels[2] = {1.0, -1.0};
  ksdd_model* lr = nullptr;
  REQUIRE(ksdd_model_create_logistic(feats, labels, 2, 2, 0.01, &lr) == KSDD_OK);
  CHECK(ksdd_model_dim(lr) == 3);
  ksdd_model_destroy(lr);
  const double bad_labels[2] = {1.0, 0.0};
  CHECK(ksdd_model_create_logistic(feats, bad_labels, 2, 2, 0.01, &lr) == KSDD_ERR_INPUT);
  const double obs[4] = {0.5, -1.0, 2.0, 0.3};
  REQUIRE(ksdd_model_create_ica(obs, 2, 2, &ica) == KSDD_OK);
  CHECK(ksdd_model_dim(ica) == 4);
  const double w_singular[4] = {1.0, 2.0, 2.0, 4.0};
  double s4[4];
  CHECK(ksdd_model_score(ica, w_singular, s4) == KSDD_ERR_SINGULAR);
  ksdd_model_destroy(ica);

  ksdd_model_destroy(m);
  ksdd_kernel_destroy(k);
  ksdd_kernel_destroy(nullptr);
  ksdd_model_destroy(nullptr);
}

TEST_CASE("loss and flow through the C interface") {
  ksdd_kernel* k = nullptr;
  ksdd_model* m = nullptr;
  const double mean[2] = {0.0, 0.0};
  const double cov[4] = {1.0, 0.0, 0.0, 1.0};
  REQUIRE(ksdd_kernel_create_gaussian(1.0, &k) == KSDD_OK);
  REQUIRE(ksdd_model_create_gaussian(mean, cov, 2, &m) == KSDD_OK);
  std::vector<double> pos;
  for (int i = 0; i < 10; ++i) {
    pos.push_back(1.0 + 0.3 * std::sin(i));
    pos.push_back(1.0 + 0.3 * std::cos(1.7 * i));
  }
  ksdd_particles* p = nullptr;
  REQUIRE(ksdd_particles_create(pos.data(), 10, 2, &p) == KSDD_OK);
  CHECK(ksdd_particles_count(p) == 10);
  CHECK(ksdd_particles_dim(p) == 2);

  double loss = 0.0;
  std::vector<double> grad(20);
  REQUIRE(ksdd_ksd_loss(k, m, p, &loss, grad.data()) == KSDD_OK);
  // Central difference on one coordinate.
  const double h = 1e-6;
  std::vector<double> shifted = pos;
  shifted[3] += h;
  ksdd_particles* q = nullptr;
  double fp = 0.0, fm = 0.0;
  REQUIRE(ksdd_particles_create(shifted.data(), 10, 2, &q) == KSDD_OK);
  ksdd_ksd_loss(k, m, q, &fp, nullptr);
  ksdd_particles_destroy(q);
  shifted[3] -= 2.0 * h;
  REQUIRE(ksdd_particles_create(shifted.data(), 10, 2, &q) == KSDD_OK);
  ksdd_ksd_loss(k, m, q, &fm, nullptr);
  ksdd_particles_destroy(q);
  CHECK(grad[3] == doctest::Approx((fp - fm) / (2.0 * h)).epsilon(1e-6));

  ksdd_flow_options opt;
  ksdd_flow_options_default(&opt, KSDD_SCHEME_KSD_LBFGS);
  opt.max_iters = 500;
  opt.tol = 1e-8;
  ksdd_flow_result res;
  REQUIRE(ksdd_flow_run(k, m, &opt, nullptr, 0, p, &res) == KSDD_OK);
  CHECK(res.final_loss < res.initial_loss);
  CHECK(res.initial_loss == doctest::Approx(loss).epsilon(1e-12));
  std::vector<double> out(20);
  REQUIRE(ksdd_particles_get(p, out.data()) == KSDD_OK);
  CHECK(out != pos);

  ksdd_flow_options_default(&opt, KSDD_SCHEME_MMD_GD);
  CHECK(ksdd_flow_run(k, m, &opt, nullptr, 0, p, &res) == KSDD_ERR_CONFIG);
  ksdd_flow_options_default(&opt, KSDD_SCHEME_SVGD);
  opt.step_size = 1e300;
  opt.max_iters = 10;
  CHECK(ksdd_flow_run(k, m, &opt, nullptr, 0, p, &res) == KSDD_ERR_DIVERGED);
  CHECK(res.status == 2);

  const double bad[2] = {NAN, 0.0};
  ksdd_particles* nanp = nullptr;
  CHECK(ksdd_particles_create(bad, 1, 2, &nanp) == KSDD_ERR_INPUT);
  ksdd_particles_destroy(p);
  ksdd_model_destroy(m);
  ksdd_kernel_destroy(k);
}

namespace {
void count_lines(const char*, void* user) { ++*static_cast<int*>(user); }
}  // namespace

TEST_CASE("experiment entry points") {
  int code = -1;
  CHECK(ksdd_experiment_run("/no/such.cfg", nullptr, &code) == KSDD_ERR_CONFIG);
  CHECK(code == 1);
  int lines = 0;
  CHECK(ksdd_generate("/no/such.spec", count_lines, &lines) != KSDD_OK);
  CHECK(lines == 0);
}
