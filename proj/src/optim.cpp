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

#include "ksdd/optim.hpp"

#include "ksdd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace ksdd {

std::string to_string(OptimStatus status) {
  switch (status) {
    case OptimStatus::Converged: return "converged";
    case OptimStatus::MaxIters: return "max_iters";
    case OptimStatus::LineSearchFailed: return "line_search_failed";
    case OptimStatus::Diverged: return "diverged";
  }
  return "unknown";
}

void LbfgsConfig::validate() const {
  if (memory < 1) throw ConfigError("lbfgs: memory must be positive");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw ConfigError("lbfgs: need 0 < c1 < c2 < 1");
  if (!(tol_grad > 0.0)) throw ConfigError("lbfgs: tol_grad must be positive");
  if (max_iters < 1) throw ConfigError("lbfgs: max_iters must be positive");
  if (max_line_search < 1) throw ConfigError("lbfgs: max_line_search must be positive");
}

namespace {

struct Probe {
  double alpha = 0.0;
  double f = 0.0;
  double slope = 0.0;  // directional derivative g(x + alpha p) . p
  Vector x;
  Vector g;

  bool finite() const { return std::isfinite(f) && std::isfinite(slope); }
};

struct SearchResult {
  bool ok = false;
  Probe point;
};

class LineSearch {
 public:
  LineSearch(const Objective& obj, const LbfgsConfig& cfg, const Vector& x, double f0,
             const Vector& p, double slope0)
      : obj_(obj), cfg_(cfg), x_(x), p_(p), f0_(f0), slope0_(slope0) {}

  int evaluations() const { return evals_; }

  Probe probe(double alpha) {
    Probe pr;
    pr.alpha = alpha;
    pr.x = x_ + alpha * p_;
    pr.g.resize(obj_.dim);
    pr.f = obj_.eval(pr.x, pr.g);
    pr.slope = pr.g.dot(p_);
    ++evals_;
    return pr;
  }

  bool armijo(const Probe& pr) const { return pr.f <= f0_ + cfg_.c1 * pr.alpha * slope0_; }
  bool curvature(const Probe& pr) const { return std::abs(pr.slope) <= -cfg_.c2 * slope0_; }

  SearchResult run(double alpha_init) {
    Probe prev;
    prev.alpha = 0.0;
    prev.f = f0_;
    prev.slope = slope0_;
    prev.x = x_;
    double alpha = alpha_init;
    for (int i = 0; evals_ < cfg_.max_line_search; ++i) {
      Probe cur = probe(alpha);
      if (!cur.finite() || !armijo(cur) || (i > 0 && cur.f >= prev.f)) {
        return zoom(std::move(prev), std::move(cur));
      }
      if (curvature(cur)) return {true, std::move(cur)};
      if (cur.slope >= 0.0) return zoom(std::move(cur), std::move(prev));
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return {false, {}};
  }

 private:
  static double cubic_minimizer(const Probe& a, const Probe& b) {
    const double d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    if (!(disc >= 0.0)) return std::nan("");
    const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
    return b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / (b.slope - a.slope + 2.0 * d2);
  }

  // `lo` satisfies sufficient decrease with the lowest value seen; the
  // interval between lo and hi contains a strong-Wolfe point.
  SearchResult zoom(Probe lo, Probe hi) {
    while (evals_ < cfg_.max_line_search) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double right = std::max(lo.alpha, hi.alpha);
      const double width = right - left;
      if (width <= 1e-16 * std::max(1.0, right)) break;
      double alpha = hi.finite() ? cubic_minimizer(lo, hi) : std::nan("");
      if (!std::isfinite(alpha) || alpha < left + 0.1 * width || alpha > right - 0.1 * width) {
        alpha = 0.5 * (lo.alpha + hi.alpha);
      }
      Probe cur = probe(alpha);
      if (!cur.finite() || !armijo(cur) || cur.f >= lo.f) {
        hi = std::move(cur);
        continue;
      }
      if (curvature(cur)) return {true, std::move(cur)};
      if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = std::move(lo);
      lo = std::move(cur);
    }
    return {false, {}};
  }

  const Objective& obj_;
  const LbfgsConfig& cfg_;
  const Vector& x_;
  const Vector& p_;
  double f0_;
  double slope0_;
  int evals_ = 0;
};

struct CurvaturePair {
  Vector s;
  Vector y;
  double rho;
};

Vector two_loop(const std::deque<CurvaturePair>& memory, const Vector& g) {
  Vector q = g;
  std::vector<double> a(memory.size());
  for (std::size_t k = memory.size(); k-- > 0;) {
    a[k] = memory[k].rho * memory[k].s.dot(q);
    q -= a[k] * memory[k].y;
  }
  if (!memory.empty()) {
    const auto& last = memory.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t k = 0; k < memory.size(); ++k) {
    const double b = memory[k].rho * memory[k].y.dot(q);
    q += (a[k] - b) * memory[k].s;
  }
  return -q;
}

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace

OptimResult lbfgs_minimize(const Objective& obj, const Vector& x0, const LbfgsConfig& cfg,
                           const IterationCallback& on_iteration) {
  cfg.validate();
  if (x0.size() != obj.dim) throw InputError("lbfgs: x0 dimension differs from objective");

  OptimResult res;
  res.x = x0;
  res.gradient.resize(obj.dim);
  res.value = obj.eval(res.x, res.gradient);
  res.evaluations = 1;
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    res.status = OptimStatus::Diverged;
    return res;
  }
  if (inf_norm(res.gradient) < cfg.tol_grad) {
    res.status = OptimStatus::Converged;
    return res;
  }

  std::deque<CurvaturePair> memory;
  res.status = OptimStatus::MaxIters;
  for (int k = 1; k <= cfg.max_iters; ++k) {
    Vector p = two_loop(memory, res.gradient);
    double slope = res.gradient.dot(p);
    if (!(slope < 0.0)) {
      memory.clear();
      p = -res.gradient;
      slope = -res.gradient.squaredNorm();
    }
    const double alpha_init = memory.empty() ? std::min(1.0, 1.0 / res.gradient.norm()) : 1.0;

    LineSearch search(obj, cfg, res.x, res.value, p, slope);
    SearchResult found = search.run(alpha_init);
    int evals = search.evaluations();
    bool fallback = false;
    if (!found.ok) {
      memory.clear();
      p = -res.gradient;
      slope = -res.gradient.squaredNorm();
      LineSearch backtrack(obj, cfg, res.x, res.value, p, slope);
      double alpha = std::min(1.0, 1.0 / res.gradient.norm());
      for (int t = 0; t < cfg.max_line_search; ++t, alpha *= 0.5) {
        Probe pr = backtrack.probe(alpha);
        if (pr.finite() && backtrack.armijo(pr) && pr.f < res.value) {
          found = {true, std::move(pr)};
          break;
        }
      }
      evals += backtrack.evaluations();
      fallback = true;
    }
    res.evaluations += evals;
    if (!found.ok) {
      res.status = OptimStatus::LineSearchFailed;
      break;
    }

    Probe& next = found.point;
    const bool wolfe = next.f <= res.value + cfg.c1 * next.alpha * slope &&
                       std::abs(next.slope) <= -cfg.c2 * slope;
    Vector s = next.x - res.x;
    Vector y = next.g - res.gradient;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      memory.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(memory.size()) > cfg.memory) memory.pop_front();
    }
    res.x = std::move(next.x);
    res.gradient = std::move(next.g);
    res.value = next.f;
    res.iterations = k;

    IterationRecord rec;
    rec.iteration = k;
    rec.value = res.value;
    rec.grad_norm_inf = inf_norm(res.gradient);
    rec.grad_norm = res.gradient.norm();
    rec.step = next.alpha;
    rec.evaluations = evals;
    rec.strong_wolfe = wolfe;
    rec.fallback = fallback;
    res.trace.push_back(rec);
    if (on_iteration) on_iteration(rec, res.x);

    if (rec.grad_norm_inf < cfg.tol_grad) {
      res.status = OptimStatus::Converged;
      break;
    }
  }
  return res;
}

OptimResult gd_minimize(const Objective& obj, const Vector& x0, double step, int max_iters,
                        double tol, const IterationCallback& on_iteration) {
  if (!(step > 0.0)) throw ConfigError("gd: step size must be positive");
  if (!(tol > 0.0)) throw ConfigError("gd: tolerance must be positive");
  if (x0.size() != obj.dim) throw InputError("gd: x0 dimension differs from objective");

  OptimResult res;
  res.x = x0;
  res.gradient.resize(obj.dim);
  res.value = obj.eval(res.x, res.gradient);
  res.evaluations = 1;
  res.status = OptimStatus::MaxIters;
  for (int k = 1;; ++k) {
    if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
      res.status = OptimStatus::Diverged;
      break;
    }
    if (inf_norm(res.gradient) < tol) {
      res.status = OptimStatus::Converged;
      break;
    }
    if (k > max_iters) break;
    res.x -= step * res.gradient;
    res.value = obj.eval(res.x, res.gradient);
    ++res.evaluations;
    res.iterations = k;

    IterationRecord rec;
    rec.iteration = k;
    rec.value = res.value;
    rec.grad_norm_inf = inf_norm(res.gradient);
    rec.grad_norm = res.gradient.norm();
    rec.step = step;
    rec.evaluations = 1;
    res.trace.push_back(rec);
    if (on_iteration) on_iteration(rec, res.x);
  }
  return res;
}

}  // namespace ksdd
