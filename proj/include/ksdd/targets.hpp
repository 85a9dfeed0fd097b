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

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace ksdd {

enum class ModelKind { Gaussian, GaussianMixture, Banana, LogisticPosterior, ICAPosterior, Annealed };

std::string to_string(ModelKind kind);

/// Unnormalized target pi known through its score s(x) = grad log pi(x).
///
/// The public entry points validate dimension and finiteness, then dispatch
/// to the model-specific hooks. Models are immutable after construction and
/// safe to evaluate concurrently.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual ModelKind kind() const = 0;
  virtual Index dim() const = 0;

  Vector score(PointRef x) const;
  /// Jacobian of the score (the Hessian of log pi). Falls back to central
  /// differences of the score with step 1e-6 when no closed form exists.
  Matrix score_jacobian(PointRef x) const;
  /// log pi(x) up to an additive constant, when available.
  std::optional<double> log_density(PointRef x) const;

  virtual bool has_log_density() const { return true; }
  virtual bool has_analytic_jacobian() const { return true; }
  virtual bool can_sample() const { return false; }
  /// Exact draw from pi. Throws UnsupportedError when `can_sample()` is false.
  virtual Vector sample(std::mt19937_64& rng) const;

 protected:
  virtual Vector compute_score(PointRef x) const = 0;
  virtual Matrix compute_jacobian(PointRef x) const;
  virtual double compute_log_density(PointRef x) const;
};

using ModelPtr = std::shared_ptr<const ScoreModel>;

/// Central-difference Jacobian of the score.
Matrix fd_score_jacobian(const ScoreModel& model, PointRef x, double step = 1e-6);

class GaussianModel final : public ScoreModel {
 public:
  GaussianModel(Vector mean, Matrix covariance);
  static std::shared_ptr<GaussianModel> standard(Index dim);

  ModelKind kind() const override { return ModelKind::Gaussian; }
  Index dim() const override { return mean_.size(); }
  bool can_sample() const override { return true; }
  Vector sample(std::mt19937_64& rng) const override;

  const Vector& mean() const { return mean_; }
  const Matrix& precision() const { return precision_; }

 protected:
  Vector compute_score(PointRef x) const override;
  Matrix compute_jacobian(PointRef x) const override;
  double compute_log_density(PointRef x) const override;

 private:
  Vector mean_;
  Matrix precision_;
  Matrix chol_;  // lower Cholesky factor of the covariance
};

struct MixtureComponent {
  double weight = 1.0;
  Vector mean;
  Matrix covariance;
};

class GaussianMixtureModel final : public ScoreModel {
 public:
  explicit GaussianMixtureModel(std::vector<MixtureComponent> components);
  /// Equal-weight mixture of N((-c, 0, ...), v I) and N((c, 0, ...), v I),
  /// symmetric about the hyperplane x_1 = 0.
  static std::shared_ptr<GaussianMixtureModel> symmetric_pair(Index dim, double centroid,
                                                              double variance);

  ModelKind kind() const override { return ModelKind::GaussianMixture; }
  Index dim() const override { return dim_; }
  bool can_sample() const override { return true; }
  Vector sample(std::mt19937_64& rng) const override;

 protected:
  Vector compute_score(PointRef x) const override;
  Matrix compute_jacobian(PointRef x) const override;
  double compute_log_density(PointRef x) const override;

 private:
  struct Component {
    double log_weight;
    double log_norm;
    Vector mean;
    Matrix precision;
    Matrix chol;
  };
  /// Per-component log densities and component scores at x.
  void responsibilities(PointRef x, Vector& resp, std::vector<Vector>& scores,
                        double* log_total) const;

  Index dim_ = 0;
  std::vector<Component> components_;
  std::vector<double> weights_;
};

/// Two-dimensional banana:
///   log pi(x) = -x1^2 / (2 a^2) - (x2 + b (x1^2 - a^2))^2 / 2.
class BananaModel final : public ScoreModel {
 public:
  explicit BananaModel(double a = 2.0, double b = 0.2);

  ModelKind kind() const override { return ModelKind::Banana; }
  Index dim() const override { return 2; }
  bool can_sample() const override { return true; }
  Vector sample(std::mt19937_64& rng) const override;

 protected:
  Vector compute_score(PointRef x) const override;
  Matrix compute_jacobian(PointRef x) const override;
  double compute_log_density(PointRef x) const override;

 private:
  double a_;
  double b_;
};

/// Features (q x p) with labels in {-1, +1}.
struct LabeledDataset {
  Matrix features;
  Vector labels;

  Index size() const { return features.rows(); }
  Index num_features() const { return features.cols(); }
  void validate() const;
};

/// Hierarchical Bayesian logistic regression in the parameterization
/// x = [w, log alpha]:
///   p(y_i = 1 | d_i, w) = 1 / (1 + exp(-w^T d_i)),
///   w | alpha ~ N(0, alpha^{-1} I_p),  alpha ~ Exp(rate).
/// The log-density includes the log|d alpha / d log alpha| = log alpha term.
class LogisticPosterior final : public ScoreModel {
 public:
  explicit LogisticPosterior(LabeledDataset data, double prior_rate = 0.01);

  ModelKind kind() const override { return ModelKind::LogisticPosterior; }
  Index dim() const override { return data_.num_features() + 1; }
  const LabeledDataset& data() const { return data_; }

 protected:
  Vector compute_score(PointRef x) const override;
  Matrix compute_jacobian(PointRef x) const override;
  double compute_log_density(PointRef x) const override;

 private:
  LabeledDataset data_;
  double rate_;
};

/// Bayesian ICA posterior over the unmixing matrix W (p x p), flattened row
/// by row. Sources have density proportional to 1 / cosh, so that
/// psi = -p_s' / p_s = tanh; the prior on W is i.i.d. N(0, 1). The
/// likelihood is summed over the q observations:
///   log p(W | X) = q log|det W| - sum_n sum_i log cosh([W x_n]_i) - |W|_F^2 / 2.
class IcaPosterior final : public ScoreModel {
 public:
  explicit IcaPosterior(Matrix samples);

  ModelKind kind() const override { return ModelKind::ICAPosterior; }
  Index dim() const override { return p_ * p_; }
  Index sources() const { return p_; }
  const Matrix& samples() const { return samples_; }

  /// Score as a p x p matrix.
  Matrix score_matrix(const Matrix& w) const;

 protected:
  Vector compute_score(PointRef x) const override;
  Matrix compute_jacobian(PointRef x) const override;
  double compute_log_density(PointRef x) const override;

 private:
  Matrix samples_;  // q x p
  Index p_;
};

/// pi^beta: the score is beta * s(x).
class AnnealedScore final : public ScoreModel {
 public:
  AnnealedScore(ModelPtr base, double beta);

  ModelKind kind() const override { return ModelKind::Annealed; }
  Index dim() const override { return base_->dim(); }
  bool has_log_density() const override { return base_->has_log_density(); }
  bool has_analytic_jacobian() const override { return base_->has_analytic_jacobian(); }
  double beta() const { return beta_; }
  const ModelPtr& base() const { return base_; }

 protected:
  Vector compute_score(PointRef x) const override;
  Matrix compute_jacobian(PointRef x) const override;
  double compute_log_density(PointRef x) const override;

 private:
  ModelPtr base_;
  double beta_;
};

/// Wraps `model` at inverse temperature beta in (0, 1].
std::shared_ptr<const AnnealedScore> anneal(ModelPtr model, double beta);

Vector logreg_score(const LabeledDataset& data, PointRef x);
Matrix ica_score(const Matrix& samples, const Matrix& w);

/// Condition number above which an unmixing matrix is treated as singular.
inline constexpr double kIcaMaxCondition = 1e12;

}  // namespace ksdd
