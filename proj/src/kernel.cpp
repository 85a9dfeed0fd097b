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

#include "ksdd/kernel.hpp"

#include "ksdd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace ksdd {

BaseKernel::BaseKernel(KernelFamily family, double bandwidth, double c, double beta)
    : family_(family), bandwidth_(bandwidth), imq_c_(c), imq_beta_(beta) {}

BaseKernel BaseKernel::gaussian(double bandwidth) {
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw ConfigError("gaussian kernel bandwidth must be positive and finite");
  }
  return BaseKernel(KernelFamily::GaussianRBF, bandwidth, 0.0, 0.0);
}

BaseKernel BaseKernel::imq(double c, double beta) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConfigError("IMQ kernel requires c > 0");
  }
  if (!(beta > -1.0 && beta < 0.0)) {
    throw ConfigError("IMQ kernel requires beta in (-1, 0)");
  }
  return BaseKernel(KernelFamily::IMQ, 1.0, c, beta);
}

std::string BaseKernel::describe() const {
  std::ostringstream os;
  if (family_ == KernelFamily::GaussianRBF) {
    os << "gaussian(sigma=" << bandwidth_ << ")";
  } else {
    os << "imq(c=" << imq_c_ << ", beta=" << imq_beta_ << ")";
  }
  return os.str();
}

RadialProfile BaseKernel::profile(double r) const {
  RadialProfile p;
  if (family_ == KernelFamily::GaussianRBF) {
    const double a = -0.5 / (bandwidth_ * bandwidth_);
    p.phi = std::exp(a * r);
    p.d1 = a * p.phi;
    p.d2 = a * p.d1;
    p.d3 = a * p.d2;
  } else {
    const double base = imq_c_ * imq_c_ + r;
    const double b = imq_beta_;
    p.phi = std::pow(base, b);
    p.d1 = b * p.phi / base;
    p.d2 = (b - 1.0) * p.d1 / base;
    p.d3 = (b - 2.0) * p.d2 / base;
  }
  return p;
}

double BaseKernel::eval(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kernel eval");
  return profile((x - y).squaredNorm()).phi;
}

Vector BaseKernel::grad1(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kernel grad1");
  const Vector u = x - y;
  return (2.0 * profile(u.squaredNorm()).d1) * u;
}

Vector BaseKernel::grad2(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kernel grad2");
  const Vector u = x - y;
  return (-2.0 * profile(u.squaredNorm()).d1) * u;
}

Matrix BaseKernel::hess2(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kernel hess2");
  const Vector u = x - y;
  const RadialProfile p = profile(u.squaredNorm());
  Matrix h = (4.0 * p.d2) * (u * u.transpose());
  h.diagonal().array() += 2.0 * p.d1;
  return h;
}

Matrix BaseKernel::hess1(PointRef x, PointRef y) const { return hess2(x, y); }

Matrix BaseKernel::cross_hess(PointRef x, PointRef y) const { return -hess2(x, y); }

double BaseKernel::div1_grad2(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kernel div1_grad2");
  const double r = (x - y).squaredNorm();
  const RadialProfile p = profile(r);
  const auto d = static_cast<double>(x.size());
  return -2.0 * d * p.d1 - 4.0 * r * p.d2;
}

Vector BaseKernel::grad2_div1_grad2(PointRef x, PointRef y) const {
  require_same_dim(x, y, "kernel grad2_div1_grad2");
  const Vector u = x - y;
  const double r = u.squaredNorm();
  const RadialProfile p = profile(r);
  const auto d = static_cast<double>(x.size());
  return (2.0 * ((4.0 + 2.0 * d) * p.d2 + 4.0 * r * p.d3)) * u;
}

Matrix BaseKernel::gram(const Positions& points) const {
  const Index n = points.rows();
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i) {
    g(i, i) = profile(0.0).phi;
    for (Index j = i + 1; j < n; ++j) {
      g(i, j) = profile((points.row(i) - points.row(j)).squaredNorm()).phi;
      g(j, i) = g(i, j);
    }
  }
  return g;
}

double median_heuristic_bandwidth(const Positions& points) {
  const Index n = points.rows();
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      dists.push_back((points.row(i) - points.row(j)).norm());
    }
  }
  if (dists.empty()) return 1.0;
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double median = *mid;
  if (dists.size() % 2 == 0) {
    median = 0.5 * (median + *std::max_element(dists.begin(), mid));
  }
  return median > 0.0 ? median : 1.0;
}

double FdCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

namespace {

double rel_error(const Matrix& analytic, const Matrix& fd) {
  const double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-8);
  return (analytic - fd).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

FdCheckReport fd_check(const BaseKernel& kernel, int samples, double step, std::uint64_t seed) {
  if (!(step > 0.0 && step <= 1e-2)) {
    throw ConfigError("fd_check step must lie in (0, 1e-2]");
  }
  if (samples <= 0) {
    throw ConfigError("fd_check needs at least one sample");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-3.0, 3.0);
  std::uniform_int_distribution<int> dim_dist(1, 5);

  double e_grad1 = 0, e_grad2 = 0, e_hess2 = 0, e_cross = 0, e_div = 0, e_grad_div = 0;
  for (int s = 0; s < samples; ++s) {
    const int d = dim_dist(rng);
    Vector x(d), y(d);
    for (int a = 0; a < d; ++a) x(a) = coord(rng);
    for (int a = 0; a < d; ++a) y(a) = coord(rng);

    Vector fd_g1(d), fd_g2(d), fd_grad_div(d);
    Matrix fd_h2(d, d), fd_cross(d, d);
    for (int a = 0; a < d; ++a) {
      Vector xp = x, xm = x, yp = y, ym = y;
      xp(a) += step;
      xm(a) -= step;
      yp(a) += step;
      ym(a) -= step;
      fd_g1(a) = (kernel.eval(xp, y) - kernel.eval(xm, y)) / (2 * step);
      fd_g2(a) = (kernel.eval(x, yp) - kernel.eval(x, ym)) / (2 * step);
      fd_h2.col(a) = (kernel.grad2(x, yp) - kernel.grad2(x, ym)) / (2 * step);
      // column b of the mixed matrix is d/dy_b of grad1
      fd_cross.col(a) = (kernel.grad1(x, yp) - kernel.grad1(x, ym)) / (2 * step);
      fd_grad_div(a) = (kernel.div1_grad2(x, yp) - kernel.div1_grad2(x, ym)) / (2 * step);
    }
    const double fd_div = fd_cross.trace();

    e_grad1 = std::max(e_grad1, rel_error(kernel.grad1(x, y), fd_g1));
    e_grad2 = std::max(e_grad2, rel_error(kernel.grad2(x, y), fd_g2));
    e_hess2 = std::max(e_hess2, rel_error(kernel.hess2(x, y), fd_h2));
    e_cross = std::max(e_cross, rel_error(kernel.cross_hess(x, y), fd_cross));
    Matrix div_a(1, 1), div_f(1, 1);
    div_a(0, 0) = kernel.div1_grad2(x, y);
    div_f(0, 0) = fd_div;
    e_div = std::max(e_div, rel_error(div_a, div_f));
    e_grad_div = std::max(e_grad_div, rel_error(kernel.grad2_div1_grad2(x, y), fd_grad_div));
  }

  FdCheckReport report;
  report.samples = samples;
  report.step = step;
  report.entries = {{"grad1", e_grad1},       {"grad2", e_grad2},
                    {"hess2", e_hess2},       {"cross_hess", e_cross},
                    {"div1_grad2", e_div},    {"grad2_div1_grad2", e_grad_div}};
  return report;
}

}  // namespace ksdd
