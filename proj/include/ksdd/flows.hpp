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

#include "ksdd/optim.hpp"
#include "ksdd/stein.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ksdd {

/// Discrete measure (1/N) sum_j delta_{x_j}: N particle positions in d
/// dimensions plus generation metadata.
struct ParticleSet {
  Positions positions;
  std::uint64_t iteration = 0;
  std::uint64_t rng_seed = 0;

  Index size() const { return positions.rows(); }
  Index dim() const { return positions.cols(); }
  /// Throws InputError on an empty set or non-finite coordinates.
  void validate() const;
};

enum class Scheme { KsdGd, KsdLbfgs, Svgd, MmdGd };

std::string to_string(Scheme scheme);
Scheme scheme_from_string(const std::string& name);

struct AnnealStage {
  double beta = 1.0;
  /// Iteration budget for the stage; empty means "until converged", bounded
  /// by FlowConfig::max_iters.
  std::optional<int> iters;
};

struct FlowConfig {
  Scheme scheme = Scheme::KsdLbfgs;
  double step_size = 1e-2;
  int max_iters = 1000;
  /// Gradient-norm (KSD) or displacement-norm (SVGD, MMD) stopping threshold.
  double tol = 1e-10;
  /// Empty schedule means a single stage at beta = 1.
  std::vector<AnnealStage> anneal_schedule;
  /// KSD_GD only: halve the step while the loss increases (max 30 halvings).
  bool backtracking = false;
  /// Keep every k-th particle snapshot; 0 disables snapshots.
  int snapshot_every = 10;
  LbfgsConfig lbfgs;

  void validate() const;
};

/// F = (1 / 2N^2) sum_ij k_pi(x_i, x_j).
double ksd_loss(const SteinEvaluation& eval);

/// Row i is (1 / N^2) sum_j grad2 k_pi(x_j, x_i).
Positions ksd_grad(const SteinEvaluation& eval);

/// One KSD Descent step: x_i <- x_i - (step / N^2) sum_j grad2 k_pi(x_j, x_i),
/// i.e. a displacement of step * ksd_grad. Throws DivergenceError when the
/// result is non-finite.
ParticleSet gd_step(const ParticleSet& particles, const SteinKernel& sk, double step);

/// SVGD direction D_i = (1/N) sum_j [k(x_j, x_i) s(x_j) + grad1 k(x_j, x_i)].
Positions svgd_direction(const Positions& x, const BaseKernel& base, const ScoreModel& model);
/// x_i <- x_i + step * D_i (moves a lone particle uphill on log pi).
ParticleSet svgd_step(const ParticleSet& particles, const BaseKernel& base, const ScoreModel& model,
                      double step);

/// MMD direction D_i = (1/N) sum_j grad2 k(x_j, x_i) - (1/M) sum_m grad2 k(y_m, x_i).
Positions mmd_direction(const Positions& x, const BaseKernel& base, const Positions& targets);
/// x_i <- x_i - step * D_i.
ParticleSet mmd_step(const ParticleSet& particles, const BaseKernel& base, const Positions& targets,
                     double step);

/// Regular grid with `points_per_dim` nodes per axis over [lower, upper].
struct GridSearch {
  Vector lower;
  Vector upper;
  int points_per_dim = 21;
};

/// `candidates` uniform draws over [lower, upper] for every greedy step.
struct RandomSearch {
  Vector lower;
  Vector upper;
  int candidates = 1000;
};

using SearchSpec = std::variant<GridSearch, RandomSearch>;

/// Greedy Stein points: the (n+1)-th point minimizes
/// (1/2) k_pi(x, x) + sum_{i <= n} k_pi(x, x_i) over the search set.
ParticleSet stein_points(const SteinKernel& sk, int n, const SearchSpec& search, std::uint64_t seed);

/// Greedy objective of a candidate given the points accepted so far.
double stein_points_objective(const SteinKernel& sk, PointRef candidate, const Positions& accepted);

struct FlowRecord {
  int iteration = 0;
  int stage = 0;
  double beta = 1.0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double step_size = 0.0;
};

struct Snapshot {
  int iteration = 0;
  Positions positions;
};

enum class FlowStatus { Converged, MaxIters, Diverged, Stalled };

std::string to_string(FlowStatus status);

struct FlowTrace {
  Scheme scheme = Scheme::KsdLbfgs;
  std::vector<FlowRecord> records;
  std::vector<Snapshot> snapshots;
  ParticleSet final;
  FlowStatus status = FlowStatus::MaxIters;
  std::string message;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double final_grad_norm = 0.0;
};

struct FlowInputs {
  BaseKernel kernel;
  ModelPtr model;
  /// Samples from pi, required by MMD_GD.
  Positions target_samples;
};

/// Runs the configured scheme stage by stage over the annealing schedule.
/// The recorded loss is the KSD loss against the stage's (annealed) target.
/// For KSD schemes grad_norm is |grad F| (Frobenius); for SVGD and MMD it is
/// the norm of the update direction. A non-finite state stops the run with
/// status Diverged and the partial trace.
FlowTrace run_flow(const FlowConfig& config, const FlowInputs& inputs, const ParticleSet& init);

nlohmann::json trace_to_json(const FlowTrace& trace);
void write_trace_json(const FlowTrace& trace, const std::filesystem::path& path);
/// Columns: iteration, stage, beta, loss, grad_norm, step_size.
void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path);

}  // namespace ksdd
