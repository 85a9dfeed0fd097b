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

// Independent reference implementations used only by tests: central finite
// differences and hand-written closed forms for the Gaussian-target /
// Gaussian-kernel case, evaluated with naive loops.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline double rel_error(const Mat& a, const Mat& ref) {
  const double scale = std::max(ref.cwiseAbs().maxCoeff(), 1e-8);
  return (a - ref).cwiseAbs().maxCoeff() / scale;
}

inline double rel_error(double a, double ref) { return std::abs(a - ref) / std::max(std::abs(ref), 1e-8); }

inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Vec xp = x;
    Vec xm = x;
    xp(a) += h;
    xm(a) -= h;
    g(a) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// J(i, a) = d f_i / d x_a.
inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  const Vec f0 = f(x);
  Mat j(f0.size(), x.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    Vec xp = x;
    Vec xm = x;
    xp(a) += h;
    xm(a) -= h;
    j.col(a) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// d^2 f / dx_a dy_b for f(x, y).
inline Mat fd_mixed(const std::function<double(const Vec&, const Vec&)>& f, const Vec& x, const Vec& y,
                    double h = 1e-4) {
  Mat m(x.size(), y.size());
  for (Eigen::Index a = 0; a < x.size(); ++a) {
    for (Eigen::Index b = 0; b < y.size(); ++b) {
      Vec xp = x, xm = x, yp = y, ym = y;
      xp(a) += h;
      xm(a) -= h;
      yp(b) += h;
      ym(b) -= h;
      m(a, b) = (f(xp, yp) - f(xp, ym) - f(xm, yp) + f(xm, ym)) / (4.0 * h * h);
    }
  }
  return m;
}

inline Vec uniform_point(std::mt19937_64& rng, Eigen::Index d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(d);
  for (Eigen::Index a = 0; a < d; ++a) v(a) = u(rng);
  return v;
}

/// Gaussian target N(m, P^{-1}) with a Gaussian kernel of bandwidth sigma,
/// written out by hand.
struct GaussGauss {
  Vec m;
  Mat prec;
  double sigma = 1.0;

  Vec score(const Vec& x) const { return -prec * (x - m); }

  double k(const Vec& x, const Vec& y) const {
    return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
  }

  // k_pi = k [s(x).s(y) + s(x).(x-y)/s2 - s(y).(x-y)/s2 + d/s2 - |x-y|^2/s2^2]
  double kpi(const Vec& x, const Vec& y) const {
    const double s2 = sigma * sigma;
    const Vec u = x - y;
    const Vec sx = score(x);
    const Vec sy = score(y);
    const double d = static_cast<double>(x.size());
    return k(x, y) * (sx.dot(sy) + sx.dot(u) / s2 - sy.dot(u) / s2 + d / s2 - u.squaredNorm() / (s2 * s2));
  }

  Vec grad2_kpi(const Vec& x, const Vec& y) const {
    const double s2 = sigma * sigma;
    const Vec u = x - y;
    const Vec sx = score(x);
    const Vec sy = score(y);
    const double d = static_cast<double>(x.size());
    const double kv = k(x, y);
    const double f = sx.dot(sy) + sx.dot(u) / s2 - sy.dot(u) / s2 + d / s2 - u.squaredNorm() / (s2 * s2);
    // d/dy of each bracket term, with ds(y)/dy = -P and du/dy = -I.
    const Vec df = -prec * sx - sx / s2 + (prec * u + sy) / s2 + 2.0 * u / (s2 * s2);
    return kv * u / s2 * f + kv * df;
  }

  double loss(const Mat& x) const {
    const auto n = x.rows();
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) total += kpi(x.row(i).transpose(), x.row(j).transpose());
    }
    return total / (2.0 * static_cast<double>(n * n));
  }

  Mat grad(const Mat& x) const {
    const auto n = x.rows();
    Mat g = Mat::Zero(n, x.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        g.row(i) += grad2_kpi(x.row(j).transpose(), x.row(i).transpose()).transpose();
      }
    }
    return g / static_cast<double>(n * n);
  }

  Mat svgd_step(const Mat& x, double step) const {
    const auto n = x.rows();
    Mat out = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      Vec dir = Vec::Zero(x.cols());
      for (Eigen::Index j = 0; j < n; ++j) {
        const Vec xj = x.row(j).transpose();
        const Vec xi = x.row(i).transpose();
        const double kv = k(xj, xi);
        dir += kv * score(xj) - kv * (xj - xi) / (sigma * sigma);
      }
      out.row(i) += step * dir.transpose() / static_cast<double>(n);
    }
    return out;
  }

  Mat mmd_step(const Mat& x, const Mat& y, double step) const {
    const auto n = x.rows();
    const auto mcount = y.rows();
    Mat out = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec xi = x.row(i).transpose();
      Vec a = Vec::Zero(x.cols());
      Vec b = Vec::Zero(x.cols());
      // grad2 k(z, xi) = k(z, xi) (z - xi) / sigma^2
      for (Eigen::Index j = 0; j < n; ++j) {
        const Vec xj = x.row(j).transpose();
        a += k(xj, xi) * (xj - xi) / (sigma * sigma);
      }
      for (Eigen::Index j = 0; j < mcount; ++j) {
        const Vec yj = y.row(j).transpose();
        b += k(yj, xi) * (yj - xi) / (sigma * sigma);
      }
      out.row(i) -= step * (a / static_cast<double>(n) - b / static_cast<double>(mcount)).transpose();
    }
    return out;
  }
};

}  // namespace oracle
