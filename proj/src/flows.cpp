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

#include "ksdd/flows.hpp"

#include "ksdd/errors.hpp"
#include "ksdd/io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace ksdd {

void ParticleSet::validate() const {
  if (positions.rows() < 1) throw InputError("particle set is empty");
  if (positions.cols() < 1) throw InputError("particle set has zero dimension");
  if (!positions.allFinite()) throw InputError("particle set has non-finite coordinates");
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::KsdGd: return "ksd_gd";
    case Scheme::KsdLbfgs: return "ksd_lbfgs";
    case Scheme::Svgd: return "svgd";
    case Scheme::MmdGd: return "mmd_gd";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& name) {
  if (name == "ksd_gd") return Scheme::KsdGd;
  if (name == "ksd_lbfgs") return Scheme::KsdLbfgs;
  if (name == "svgd") return Scheme::Svgd;
  if (name == "mmd_gd") return Scheme::MmdGd;
  throw ConfigError("unknown scheme '" + name + "'");
}

std::string to_string(FlowStatus status) {
  switch (status) {
    case FlowStatus::Converged: return "converged";
    case FlowStatus::MaxIters: return "max_iters";
    case FlowStatus::Diverged: return "diverged";
    case FlowStatus::Stalled: return "stalled";
  }
  return "unknown";
}

void FlowConfig::validate() const {
  if (!(step_size > 0.0)) throw ConfigError("flow: step size must be positive");
  if (!(tol > 0.0)) throw ConfigError("flow: tolerance must be positive");
  if (max_iters < 1) throw ConfigError("flow: max_iters must be positive");
  if (snapshot_every < 0) throw ConfigError("flow: snapshot_every must be non-negative");
  for (const auto& st : anneal_schedule) {
    if (!(st.beta > 0.0 && st.beta <= 1.0)) throw ConfigError("flow: anneal beta must lie in (0, 1]");
    if (st.iters && *st.iters < 1) throw ConfigError("flow: anneal stage budget must be positive");
  }
  if (scheme == Scheme::KsdLbfgs) lbfgs.validate();
}

// ---------------------------------------------------------------------------
// Loss, gradient and single steps

double ksd_loss(const SteinEvaluation& eval) {
  const auto n = static_cast<double>(eval.n);
  return eval.gram.sum() / (2.0 * n * n);
}

Positions ksd_grad(const SteinEvaluation& eval) {
  if (!eval.has_gradient()) throw InputError("ksd_grad: evaluation has no gradient block");
  Positions g = Positions::Zero(eval.n, eval.d);
  for (Index j = 0; j < eval.n; ++j) {
    for (Index i = 0; i < eval.n; ++i) g.row(i) += eval.grad(j, i).transpose();
  }
  const auto n = static_cast<double>(eval.n);
  g /= n * n;
  return g;
}

ParticleSet gd_step(const ParticleSet& particles, const SteinKernel& sk, double step) {
  if (!(step > 0.0)) throw ConfigError("gd_step: step size must be positive");
  particles.validate();
  ParticleSet next = particles;
  next.positions -= step * ksd_grad(evaluate_particles(sk, particles.positions));
  if (!next.positions.allFinite()) {
    throw DivergenceError("gd_step: non-finite positions after step " +
                          std::to_string(particles.iteration) + " (step size " + format_double(step) + ")");
  }
  ++next.iteration;
  return next;
}

Positions svgd_direction(const Positions& x, const BaseKernel& base, const ScoreModel& model) {
  const Index n = x.rows();
  const Index d = x.cols();
  std::vector<Vector> scores(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) scores[static_cast<std::size_t>(j)] = model.score(x.row(j).transpose());
  Positions dir = Positions::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const Vector u = (x.row(j) - x.row(i)).transpose();
      const RadialProfile p = base.profile(u.squaredNorm());
      // k(x_j, x_i) s(x_j) + grad1 k(x_j, x_i)
      dir.row(i) += (p.phi * scores[static_cast<std::size_t>(j)] + (2.0 * p.d1) * u).transpose();
    }
  }
  dir /= static_cast<double>(n);
  return dir;
}

ParticleSet svgd_step(const ParticleSet& particles, const BaseKernel& base, const ScoreModel& model,
                      double step) {
  if (!(step > 0.0)) throw ConfigError("svgd_step: step size must be positive");
  particles.validate();
  ParticleSet next = particles;
  next.positions += step * svgd_direction(particles.positions, base, model);
  if (!next.positions.allFinite()) throw DivergenceError("svgd_step: non-finite positions");
  ++next.iteration;
  return next;
}

Positions mmd_direction(const Positions& x, const BaseKernel& base, const Positions& targets) {
  if (targets.rows() == 0) throw InputError("mmd: empty target sample");
  if (targets.cols() != x.cols()) throw InputError("mmd: target sample dimension mismatch");
  const Index n = x.rows();
  const Index m = targets.rows();
  Positions dir = Positions::Zero(n, x.cols());
  for (Index i = 0; i < n; ++i) {
    Vector attract = Vector::Zero(x.cols());
    Vector repel = Vector::Zero(x.cols());
    for (Index j = 0; j < n; ++j) {
      const Vector u = (x.row(j) - x.row(i)).transpose();
      repel -= (2.0 * base.profile(u.squaredNorm()).d1) * u;  // grad2 k(x_j, x_i)
    }
    for (Index j = 0; j < m; ++j) {
      const Vector u = (targets.row(j) - x.row(i)).transpose();
      attract -= (2.0 * base.profile(u.squaredNorm()).d1) * u;  // grad2 k(y_j, x_i)
    }
    dir.row(i) = (repel / static_cast<double>(n) - attract / static_cast<double>(m)).transpose();
  }
  return dir;
}

ParticleSet mmd_step(const ParticleSet& particles, const BaseKernel& base, const Positions& targets,
                     double step) {
  if (!(step > 0.0)) throw ConfigError("mmd_step: step size must be positive");
  particles.validate();
  ParticleSet next = particles;
  next.positions -= step * mmd_direction(particles.positions, base, targets);
  if (!next.positions.allFinite()) throw DivergenceError("mmd_step: non-finite positions");
  ++next.iteration;
  return next;
}

// ---------------------------------------------------------------------------
// Greedy Stein points

double stein_points_objective(const SteinKernel& sk, PointRef candidate, const Positions& accepted) {
  const Vector s = sk.model()->score(candidate);
  double obj = 0.5 * sk.kpi_cached(candidate, candidate, s, s);
  for (Index i = 0; i < accepted.rows(); ++i) {
    const auto a = accepted.row(i).transpose();
    obj += sk.kpi_cached(candidate, a, s, sk.model()->score(a));
  }
  return obj;
}

namespace {

void check_box(const Vector& lower, const Vector& upper, Index d) {
  if (lower.size() != d || upper.size() != d) throw InputError("stein_points: search box dimension mismatch");
  if (!lower.allFinite() || !upper.allFinite() || (upper.array() < lower.array()).any()) {
    throw InputError("stein_points: search box must be bounded with lower <= upper");
  }
}

Positions grid_candidates(const GridSearch& g, Index d) {
  check_box(g.lower, g.upper, d);
  if (g.points_per_dim < 1) throw InputError("stein_points: empty search set");
  double total = std::pow(static_cast<double>(g.points_per_dim), static_cast<double>(d));
  if (total > 1e7) throw InputError("stein_points: grid too large");
  const auto count = static_cast<Index>(total);
  Positions c(count, d);
  for (Index idx = 0; idx < count; ++idx) {
    Index rem = idx;
    for (Index a = d - 1; a >= 0; --a) {
      const Index k = rem % g.points_per_dim;
      rem /= g.points_per_dim;
      c(idx, a) = g.points_per_dim == 1
                      ? 0.5 * (g.lower(a) + g.upper(a))
                      : g.lower(a) + (g.upper(a) - g.lower(a)) * static_cast<double>(k) /
                                         static_cast<double>(g.points_per_dim - 1);
    }
  }
  return c;
}

}  // namespace

ParticleSet stein_points(const SteinKernel& sk, int n, const SearchSpec& search, std::uint64_t seed) {
  if (n < 1) throw InputError("stein_points: need n >= 1");
  const Index d = sk.dim();
  std::mt19937_64 rng(seed);

  const auto* grid = std::get_if<GridSearch>(&search);
  const auto* random = std::get_if<RandomSearch>(&search);
  if (random != nullptr) {
    check_box(random->lower, random->upper, d);
    if (random->candidates < 1) throw InputError("stein_points: empty search set");
  }

  // Running objective per candidate: 0.5 k_pi(c, c) + sum over accepted.
  Positions cand;
  std::vector<Vector> cand_scores;
  Vector running;
  auto reset_candidates = [&](Positions c) {
    cand = std::move(c);
    cand_scores.resize(static_cast<std::size_t>(cand.rows()));
    running.resize(cand.rows());
    for (Index k = 0; k < cand.rows(); ++k) {
      const auto ck = cand.row(k).transpose();
      cand_scores[static_cast<std::size_t>(k)] = sk.model()->score(ck);
      const auto& s = cand_scores[static_cast<std::size_t>(k)];
      running(k) = 0.5 * sk.kpi_cached(ck, ck, s, s);
    }
  };
  auto draw_random = [&]() {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Positions c(random->candidates, d);
    for (Index k = 0; k < c.rows(); ++k) {
      for (Index a = 0; a < d; ++a) {
        c(k, a) = random->lower(a) + (random->upper(a) - random->lower(a)) * unit(rng);
      }
    }
    return c;
  };

  ParticleSet out;
  out.rng_seed = seed;
  out.positions.resize(0, d);
  if (grid != nullptr) reset_candidates(grid_candidates(*grid, d));

  for (int step = 0; step < n; ++step) {
    if (random != nullptr) {
      reset_candidates(draw_random());
      for (Index k = 0; k < cand.rows(); ++k) {
        const auto ck = cand.row(k).transpose();
        for (Index i = 0; i < out.positions.rows(); ++i) {
          const auto a = out.positions.row(i).transpose();
          running(k) += sk.kpi_cached(ck, a, cand_scores[static_cast<std::size_t>(k)], sk.model()->score(a));
        }
      }
    }
    Index best = 0;
    for (Index k = 1; k < cand.rows(); ++k) {
      if (running(k) < running(best)) best = k;
    }
    const Vector chosen = cand.row(best).transpose();
    out.positions.conservativeResize(out.positions.rows() + 1, d);
    out.positions.row(out.positions.rows() - 1) = chosen.transpose();
    if (grid != nullptr) {
      const Vector sc = sk.model()->score(chosen);
      for (Index k = 0; k < cand.rows(); ++k) {
        running(k) += sk.kpi_cached(cand.row(k).transpose(), chosen, cand_scores[static_cast<std::size_t>(k)], sc);
      }
    }
  }
  out.iteration = static_cast<std::uint64_t>(n);
  return out;
}

// ---------------------------------------------------------------------------
// Flow driver

namespace {

class FlowRunner {
 public:
  FlowRunner(const FlowConfig& cfg, const FlowInputs& in, const ParticleSet& init)
      : cfg_(cfg), in_(in) {
    trace_.scheme = cfg.scheme;
    trace_.final = init;
  }

  FlowTrace run() {
    std::vector<AnnealStage> stages = cfg_.anneal_schedule;
    if (stages.empty()) stages.push_back({1.0, std::nullopt});

    bool first = true;
    for (std::size_t s = 0; s < stages.size(); ++s) {
      stage_ = static_cast<int>(s);
      beta_ = stages[s].beta;
      ModelPtr model = beta_ == 1.0 ? in_.model : ModelPtr(anneal(in_.model, beta_));
      SteinKernel sk(in_.kernel, model);
      const int budget = stages[s].iters.value_or(cfg_.max_iters);
      if (first) {
        trace_.initial_loss = loss(sk, trace_.final.positions);
        first = false;
      }
      try {
        switch (cfg_.scheme) {
          case Scheme::KsdGd: run_gd(sk, budget); break;
          case Scheme::KsdLbfgs: run_lbfgs(sk, budget); break;
          case Scheme::Svgd: run_direction(sk, *model, budget, +1.0); break;
          case Scheme::MmdGd: run_direction(sk, *model, budget, -1.0); break;
        }
      } catch (const DivergenceError& e) {
        trace_.status = FlowStatus::Diverged;
        trace_.message = e.what();
      } catch (const InputError& e) {
        // Scores or positions went non-finite inside an evaluation.
        trace_.status = FlowStatus::Diverged;
        trace_.message = e.what();
      } catch (const SingularError& e) {
        trace_.status = FlowStatus::Diverged;
        trace_.message = e.what();
      }
      if (trace_.status == FlowStatus::Diverged) break;
      final_sk_ = std::make_unique<SteinKernel>(sk);
    }
    if (trace_.status != FlowStatus::Diverged && final_sk_) {
      trace_.final_loss = loss(*final_sk_, trace_.final.positions);
    }
    snapshot(true);
    return std::move(trace_);
  }

 private:
  static double loss(const SteinKernel& sk, const Positions& x) {
    return ksd_loss(evaluate_particles(sk, x, false));
  }

  void record(double loss_value, double grad_norm, double step) {
    trace_.records.push_back({iteration_, stage_, beta_, loss_value, grad_norm, step});
    trace_.final_loss = loss_value;
    trace_.final_grad_norm = grad_norm;
    snapshot(false);
  }

  void snapshot(bool force) {
    if (cfg_.snapshot_every == 0 && !force) return;
    if (force || iteration_ % cfg_.snapshot_every == 0) {
      if (!trace_.snapshots.empty() && trace_.snapshots.back().iteration == iteration_) {
        trace_.snapshots.back().positions = trace_.final.positions;
        return;
      }
      trace_.snapshots.push_back({iteration_, trace_.final.positions});
    }
  }

  void accept(Positions next) {
    if (!next.allFinite()) {
      throw DivergenceError("non-finite particle positions at iteration " + std::to_string(iteration_ + 1));
    }
    trace_.final.positions = std::move(next);
    ++trace_.final.iteration;
    ++iteration_;
  }

  void run_gd(const SteinKernel& sk, int budget) {
    double step = cfg_.step_size;
    SteinEvaluation ev = evaluate_particles(sk, trace_.final.positions);
    double f = ksd_loss(ev);
    Positions g = ksd_grad(ev);
    record(f, g.norm(), step);
    trace_.status = FlowStatus::MaxIters;
    for (int t = 0; t < budget; ++t) {
      if (g.norm() < cfg_.tol) {
        trace_.status = FlowStatus::Converged;
        return;
      }
      Positions next = trace_.final.positions - step * g;
      if (!next.allFinite()) throw DivergenceError("non-finite positions in KSD gradient descent");
      SteinEvaluation ev_next = evaluate_particles(sk, next);
      double f_next = ksd_loss(ev_next);
      for (int h = 0; cfg_.backtracking && h < 30 && !(f_next <= f); ++h) {
        step *= 0.5;
        next = trace_.final.positions - step * g;
        ev_next = evaluate_particles(sk, next);
        f_next = ksd_loss(ev_next);
      }
      if (!std::isfinite(f_next)) throw DivergenceError("non-finite KSD loss in gradient descent");
      accept(std::move(next));
      f = f_next;
      g = ksd_grad(ev_next);
      record(f, g.norm(), step);
    }
    if (g.norm() < cfg_.tol) trace_.status = FlowStatus::Converged;
  }

  void run_lbfgs(const SteinKernel& sk, int budget) {
    const Index n = trace_.final.size();
    const Index d = trace_.final.dim();
    Objective obj;
    obj.dim = n * d;
    obj.eval = [&](const Vector& flat, Vector& grad) {
      if (!flat.allFinite()) {
        grad.setConstant(std::numeric_limits<double>::quiet_NaN());
        return std::numeric_limits<double>::quiet_NaN();
      }
      const Positions x = Eigen::Map<const Positions>(flat.data(), n, d);
      try {
        const SteinEvaluation ev = evaluate_particles(sk, x);
        const Positions g = ksd_grad(ev);
        grad = Eigen::Map<const Vector>(g.data(), g.size());
        return ksd_loss(ev);
      } catch (const SingularError&) {
        // The line search treats a non-finite value as a failed probe.
        grad.setConstant(std::numeric_limits<double>::quiet_NaN());
        return std::numeric_limits<double>::quiet_NaN();
      }
    };
    LbfgsConfig lcfg = cfg_.lbfgs;
    lcfg.tol_grad = cfg_.tol;
    lcfg.max_iters = budget;

    const Positions& x0 = trace_.final.positions;
    const Vector flat0 = Eigen::Map<const Vector>(x0.data(), x0.size());
    {
      Vector g0(obj.dim);
      const double f0 = obj.eval(flat0, g0);
      record(f0, g0.norm(), 0.0);
    }
    const OptimResult res = lbfgs_minimize(obj, flat0, lcfg, [&](const IterationRecord& rec, const Vector& x) {
      accept(Eigen::Map<const Positions>(x.data(), n, d));
      record(rec.value, rec.grad_norm, rec.step);
    });
    switch (res.status) {
      case OptimStatus::Converged: trace_.status = FlowStatus::Converged; break;
      case OptimStatus::MaxIters: trace_.status = FlowStatus::MaxIters; break;
      case OptimStatus::LineSearchFailed:
        trace_.status = FlowStatus::Stalled;
        trace_.message = "line search could not make progress";
        break;
      case OptimStatus::Diverged: throw DivergenceError("L-BFGS objective is non-finite");
    }
    trace_.final_grad_norm = res.gradient.norm();
  }

  // sign = +1 for SVGD (ascent direction), -1 for MMD (descent on MMD^2).
  void run_direction(const SteinKernel& sk, const ScoreModel& model, int budget, double sign) {
    const double step = cfg_.step_size;
    auto direction = [&](const Positions& x) {
      return sign > 0 ? svgd_direction(x, in_.kernel, model) : mmd_direction(x, in_.kernel, in_.target_samples);
    };
    Positions dir = direction(trace_.final.positions);
    record(loss(sk, trace_.final.positions), dir.norm(), step);
    trace_.status = FlowStatus::MaxIters;
    for (int t = 0; t < budget; ++t) {
      if (dir.norm() < cfg_.tol) {
        trace_.status = FlowStatus::Converged;
        return;
      }
      accept(trace_.final.positions + (sign * step) * dir);
      dir = direction(trace_.final.positions);
      const double f = loss(sk, trace_.final.positions);
      if (!std::isfinite(f) || !dir.allFinite()) throw DivergenceError("non-finite state in particle flow");
      record(f, dir.norm(), step);
    }
    if (dir.norm() < cfg_.tol) trace_.status = FlowStatus::Converged;
  }

  const FlowConfig& cfg_;
  const FlowInputs& in_;
  FlowTrace trace_;
  std::unique_ptr<SteinKernel> final_sk_;
  int iteration_ = 0;
  int stage_ = 0;
  double beta_ = 1.0;
};

}  // namespace

FlowTrace run_flow(const FlowConfig& config, const FlowInputs& inputs, const ParticleSet& init) {
  config.validate();
  init.validate();
  if (!inputs.model) throw ConfigError("run_flow: no target model");
  if (init.dim() != inputs.model->dim()) throw InputError("run_flow: particle dimension differs from model");
  if (config.scheme == Scheme::MmdGd && inputs.target_samples.rows() == 0) {
    throw ConfigError("run_flow: MMD_GD needs target samples");
  }
  return FlowRunner(config, inputs, init).run();
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json positions_json(const Positions& p) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < p.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index a = 0; a < p.cols(); ++a) row.push_back(p(i, a));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

nlohmann::json trace_to_json(const FlowTrace& trace) {
  nlohmann::json j;
  j["scheme"] = to_string(trace.scheme);
  j["status"] = to_string(trace.status);
  j["message"] = trace.message;
  j["particles"] = trace.final.size();
  j["dim"] = trace.final.dim();
  j["iterations"] = trace.final.iteration;
  j["initial_loss"] = trace.initial_loss;
  j["final_loss"] = trace.final_loss;
  j["final_grad_norm"] = trace.final_grad_norm;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : trace.records) {
    recs.push_back({{"iteration", r.iteration},
                    {"stage", r.stage},
                    {"beta", r.beta},
                    {"loss", r.loss},
                    {"grad_norm", r.grad_norm},
                    {"step_size", r.step_size}});
  }
  j["records"] = std::move(recs);
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : trace.snapshots) {
    snaps.push_back({{"iteration", s.iteration}, {"positions", positions_json(s.positions)}});
  }
  j["snapshots"] = std::move(snaps);
  return j;
}

void write_trace_json(const FlowTrace& trace, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << trace_to_json(trace).dump(1) << '\n';
}

void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path) {
  Matrix values(static_cast<Index>(trace.records.size()), 6);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    values.row(static_cast<Index>(i)) << r.iteration, r.stage, r.beta, r.loss, r.grad_norm, r.step_size;
  }
  write_csv(path, {"iteration", "stage", "beta", "loss", "grad_norm", "step_size"}, values);
}

}  // namespace ksdd
