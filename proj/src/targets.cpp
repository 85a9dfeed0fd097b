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

#include "ksdd/targets.hpp"

#include "ksdd/errors.hpp"

#include <cmath>
#include <numbers>

namespace ksdd {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gaussian: return "gaussian";
    case ModelKind::GaussianMixture: return "gaussian_mixture";
    case ModelKind::Banana: return "banana";
    case ModelKind::LogisticPosterior: return "logistic_posterior";
    case ModelKind::ICAPosterior: return "ica_posterior";
    case ModelKind::Annealed: return "annealed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ScoreModel

Vector ScoreModel::score(PointRef x) const {
  require_dim(x, dim(), "score");
  require_finite(x, "score");
  return compute_score(x);
}

Matrix ScoreModel::score_jacobian(PointRef x) const {
  require_dim(x, dim(), "score_jacobian");
  require_finite(x, "score_jacobian");
  return compute_jacobian(x);
}

std::optional<double> ScoreModel::log_density(PointRef x) const {
  require_dim(x, dim(), "log_density");
  require_finite(x, "log_density");
  if (!has_log_density()) return std::nullopt;
  return compute_log_density(x);
}

Vector ScoreModel::sample(std::mt19937_64& /*rng*/) const {
  throw UnsupportedError("model '" + to_string(kind()) + "' has no exact sampler");
}

Matrix ScoreModel::compute_jacobian(PointRef x) const { return fd_score_jacobian(*this, x); }

double ScoreModel::compute_log_density(PointRef /*x*/) const {
  throw UnsupportedError("model '" + to_string(kind()) + "' has no log-density");
}

Matrix fd_score_jacobian(const ScoreModel& model, PointRef x, double step) {
  const Index d = model.dim();
  Matrix jac(d, d);
  Vector xp = x;
  Vector xm = x;
  for (Index a = 0; a < d; ++a) {
    xp(a) = x(a) + step;
    xm(a) = x(a) - step;
    jac.col(a) = (model.score(xp) - model.score(xm)) / (2.0 * step);
    xp(a) = x(a);
    xm(a) = x(a);
  }
  return jac;
}

namespace {

Vector standard_normal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Index i = 0; i < n; ++i) z(i) = normal(rng);
  return z;
}

Matrix cholesky_or_throw(const Matrix& cov, const char* what) {
  if (cov.rows() != cov.cols()) throw InputError(std::string(what) + ": covariance must be square");
  if (!cov.isApprox(cov.transpose(), 1e-12)) {
    throw InputError(std::string(what) + ": covariance must be symmetric");
  }
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw InputError(std::string(what) + ": covariance must be positive definite");
  }
  return llt.matrixL();
}

double log_sigmoid(double z) {
  return z > 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double log_cosh(double u) {
  const double a = std::abs(u);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

// ---------------------------------------------------------------------------
// Gaussian

GaussianModel::GaussianModel(Vector mean, Matrix covariance) : mean_(std::move(mean)) {
  if (mean_.size() == 0) throw InputError("gaussian: empty mean");
  if (covariance.rows() != mean_.size()) throw InputError("gaussian: covariance/mean size mismatch");
  chol_ = cholesky_or_throw(covariance, "gaussian");
  precision_ = covariance.llt().solve(Matrix::Identity(mean_.size(), mean_.size()));
  precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
}

std::shared_ptr<GaussianModel> GaussianModel::standard(Index dim) {
  return std::make_shared<GaussianModel>(Vector::Zero(dim), Matrix::Identity(dim, dim));
}

Vector GaussianModel::compute_score(PointRef x) const { return -(precision_ * (x - mean_)); }

Matrix GaussianModel::compute_jacobian(PointRef /*x*/) const { return -precision_; }

double GaussianModel::compute_log_density(PointRef x) const {
  const Vector u = x - mean_;
  return -0.5 * u.dot(precision_ * u);
}

Vector GaussianModel::sample(std::mt19937_64& rng) const {
  return mean_ + chol_ * standard_normal(dim(), rng);
}

// ---------------------------------------------------------------------------
// Gaussian mixture

GaussianMixtureModel::GaussianMixtureModel(std::vector<MixtureComponent> components) {
  if (components.empty()) throw InputError("mixture: no components");
  dim_ = components.front().mean.size();
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw InputError("mixture: weights must be positive");
    total += c.weight;
  }
  for (const auto& c : components) {
    if (c.mean.size() != dim_ || c.covariance.rows() != dim_) {
      throw InputError("mixture: inconsistent component dimensions");
    }
    Component comp;
    comp.chol = cholesky_or_throw(c.covariance, "mixture");
    comp.mean = c.mean;
    comp.precision = c.covariance.llt().solve(Matrix::Identity(dim_, dim_));
    comp.precision = 0.5 * (comp.precision + comp.precision.transpose()).eval();
    comp.log_weight = std::log(c.weight / total);
    const double log_det = 2.0 * comp.chol.diagonal().array().log().sum();
    comp.log_norm = -0.5 * (static_cast<double>(dim_) * std::log(2.0 * std::numbers::pi) + log_det);
    components_.push_back(std::move(comp));
    weights_.push_back(c.weight / total);
  }
}

std::shared_ptr<GaussianMixtureModel> GaussianMixtureModel::symmetric_pair(Index dim, double centroid,
                                                                           double variance) {
  if (dim < 1) throw InputError("mixture: dimension must be positive");
  if (!(variance > 0.0)) throw InputError("mixture: variance must be positive");
  Vector m = Vector::Zero(dim);
  m(0) = centroid;
  const Matrix cov = variance * Matrix::Identity(dim, dim);
  return std::make_shared<GaussianMixtureModel>(
      std::vector<MixtureComponent>{{0.5, -m, cov}, {0.5, m, cov}});
}

void GaussianMixtureModel::responsibilities(PointRef x, Vector& resp, std::vector<Vector>& scores,
                                            double* log_total) const {
  const auto k = static_cast<Index>(components_.size());
  Vector logp(k);
  scores.resize(components_.size());
  for (Index c = 0; c < k; ++c) {
    const auto& comp = components_[static_cast<std::size_t>(c)];
    const Vector u = x - comp.mean;
    const Vector pu = comp.precision * u;
    logp(c) = comp.log_weight + comp.log_norm - 0.5 * u.dot(pu);
    scores[static_cast<std::size_t>(c)] = -pu;
  }
  const double m = logp.maxCoeff();
  resp = (logp.array() - m).exp();
  const double z = resp.sum();
  resp /= z;
  if (log_total != nullptr) *log_total = m + std::log(z);
}

Vector GaussianMixtureModel::compute_score(PointRef x) const {
  Vector resp;
  std::vector<Vector> scores;
  responsibilities(x, resp, scores, nullptr);
  Vector s = Vector::Zero(dim_);
  for (std::size_t c = 0; c < scores.size(); ++c) s += resp(static_cast<Index>(c)) * scores[c];
  return s;
}

Matrix GaussianMixtureModel::compute_jacobian(PointRef x) const {
  Vector resp;
  std::vector<Vector> scores;
  responsibilities(x, resp, scores, nullptr);
  Vector s = Vector::Zero(dim_);
  Matrix jac = Matrix::Zero(dim_, dim_);
  for (std::size_t c = 0; c < scores.size(); ++c) {
    const double r = resp(static_cast<Index>(c));
    s += r * scores[c];
    jac += r * (scores[c] * scores[c].transpose() - components_[c].precision);
  }
  jac -= s * s.transpose();
  return jac;
}

double GaussianMixtureModel::compute_log_density(PointRef x) const {
  Vector resp;
  std::vector<Vector> scores;
  double log_total = 0.0;
  responsibilities(x, resp, scores, &log_total);
  return log_total;
}

Vector GaussianMixtureModel::sample(std::mt19937_64& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
  const auto& comp = components_[pick(rng)];
  return comp.mean + comp.chol * standard_normal(dim_, rng);
}

// ---------------------------------------------------------------------------
// Banana

BananaModel::BananaModel(double a, double b) : a_(a), b_(b) {
  if (!(a > 0.0)) throw InputError("banana: a must be positive");
}

Vector BananaModel::compute_score(PointRef x) const {
  const double t = x(1) + b_ * (x(0) * x(0) - a_ * a_);
  Vector s(2);
  s(0) = -x(0) / (a_ * a_) - 2.0 * b_ * x(0) * t;
  s(1) = -t;
  return s;
}

Matrix BananaModel::compute_jacobian(PointRef x) const {
  const double t = x(1) + b_ * (x(0) * x(0) - a_ * a_);
  Matrix j(2, 2);
  j(0, 0) = -1.0 / (a_ * a_) - 2.0 * b_ * t - 4.0 * b_ * b_ * x(0) * x(0);
  j(0, 1) = -2.0 * b_ * x(0);
  j(1, 0) = j(0, 1);
  j(1, 1) = -1.0;
  return j;
}

double BananaModel::compute_log_density(PointRef x) const {
  const double t = x(1) + b_ * (x(0) * x(0) - a_ * a_);
  return -x(0) * x(0) / (2.0 * a_ * a_) - 0.5 * t * t;
}

Vector BananaModel::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(2);
  x(0) = a_ * normal(rng);
  x(1) = -b_ * (x(0) * x(0) - a_ * a_) + normal(rng);
  return x;
}

// ---------------------------------------------------------------------------
// Logistic regression posterior

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw InputError("dataset: feature rows and label count differ");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels(i) != 1.0 && labels(i) != -1.0) {
      throw InputError("dataset: labels must be +1 or -1");
    }
  }
  if (!features.allFinite()) throw InputError("dataset: non-finite feature value");
}

LogisticPosterior::LogisticPosterior(LabeledDataset data, double prior_rate)
    : data_(std::move(data)), rate_(prior_rate) {
  data_.validate();
  if (data_.num_features() < 1) throw InputError("logistic posterior needs at least one feature");
  if (!(rate_ > 0.0)) throw InputError("logistic posterior: prior rate must be positive");
}

Vector LogisticPosterior::compute_score(PointRef x) const {
  const Index p = data_.num_features();
  const auto w = x.head(p);
  const double theta = x(p);
  const double alpha = std::exp(theta);

  Vector g(p + 1);
  g.head(p) = -alpha * w;
  for (Index i = 0; i < data_.size(); ++i) {
    const double y = data_.labels(i);
    const double z = y * data_.features.row(i).dot(w);
    g.head(p) += (y * sigmoid(-z)) * data_.features.row(i).transpose();
  }
  g(p) = 0.5 * static_cast<double>(p) - 0.5 * alpha * w.squaredNorm() - rate_ * alpha + 1.0;
  return g;
}

Matrix LogisticPosterior::compute_jacobian(PointRef x) const {
  const Index p = data_.num_features();
  const auto w = x.head(p);
  const double alpha = std::exp(x(p));

  Matrix j = Matrix::Zero(p + 1, p + 1);
  for (Index i = 0; i < data_.size(); ++i) {
    const double z = data_.labels(i) * data_.features.row(i).dot(w);
    const double c = sigmoid(z) * sigmoid(-z);
    j.topLeftCorner(p, p).noalias() -= c * data_.features.row(i).transpose() * data_.features.row(i);
  }
  j.topLeftCorner(p, p).diagonal().array() -= alpha;
  j.col(p).head(p) = -alpha * w;
  j.row(p).head(p) = -alpha * w.transpose();
  j(p, p) = -alpha * (0.5 * w.squaredNorm() + rate_);
  return j;
}

double LogisticPosterior::compute_log_density(PointRef x) const {
  const Index p = data_.num_features();
  const auto w = x.head(p);
  const double theta = x(p);
  const double alpha = std::exp(theta);
  double lp = 0.0;
  for (Index i = 0; i < data_.size(); ++i) {
    lp += log_sigmoid(data_.labels(i) * data_.features.row(i).dot(w));
  }
  lp += 0.5 * static_cast<double>(p) * theta - 0.5 * alpha * w.squaredNorm();
  lp += -rate_ * alpha + theta;
  return lp;
}

Vector logreg_score(const LabeledDataset& data, PointRef x) {
  return LogisticPosterior(data).score(x);
}

// ---------------------------------------------------------------------------
// ICA posterior

namespace {

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Matrix unflatten(PointRef x, Index p) {
  return Eigen::Map<const RowMajorMatrix>(x.data(), p, p);
}

Vector flatten(const Matrix& m) {
  RowMajorMatrix r = m;
  return Eigen::Map<const Vector>(r.data(), r.size());
}

/// W^{-T}, rejecting numerically singular W.
Matrix inverse_transpose_checked(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0) || smax / smin > kIcaMaxCondition) {
    throw SingularError("ica: unmixing matrix is numerically singular");
  }
  return w.partialPivLu().inverse().transpose();
}

}  // namespace

IcaPosterior::IcaPosterior(Matrix samples) : samples_(std::move(samples)), p_(samples_.cols()) {
  if (p_ < 1) throw InputError("ica posterior needs p >= 1");
  if (!samples_.allFinite()) throw InputError("ica posterior: non-finite sample");
}

Matrix IcaPosterior::score_matrix(const Matrix& w) const {
  if (w.rows() != p_ || w.cols() != p_) throw InputError("ica: W has the wrong shape");
  const auto q = static_cast<double>(samples_.rows());
  Matrix s = -w;
  if (samples_.rows() > 0) {
    const Matrix t = (w * samples_.transpose()).array().tanh().matrix();  // p x q
    s += q * inverse_transpose_checked(w) - t * samples_;
  }
  return s;
}

Vector IcaPosterior::compute_score(PointRef x) const { return flatten(score_matrix(unflatten(x, p_))); }

Matrix IcaPosterior::compute_jacobian(PointRef x) const {
  const Matrix w = unflatten(x, p_);
  const Index p = p_;
  const Index q = samples_.rows();
  Matrix j = -Matrix::Identity(p * p, p * p);
  if (q == 0) return j;

  const Matrix a = inverse_transpose_checked(w);
  const Matrix t = (w * samples_.transpose()).array().tanh().matrix();  // p x q
  const Matrix h = (1.0 - t.array().square()).matrix();                 // sech^2
  const auto qd = static_cast<double>(q);
  for (Index k = 0; k < p; ++k) {
    // C_k = sum_n h_{kn} x_n x_n^T
    const Matrix ck = samples_.transpose() * h.row(k).asDiagonal() * samples_;
    for (Index l = 0; l < p; ++l) {
      const Index col = k * p + l;
      for (Index i = 0; i < p; ++i) {
        for (Index jj = 0; jj < p; ++jj) {
          double v = -qd * a(i, l) * a(k, jj);
          if (i == k) v -= ck(l, jj);
          j(i * p + jj, col) += v;
        }
      }
    }
  }
  return j;
}

double IcaPosterior::compute_log_density(PointRef x) const {
  const Matrix w = unflatten(x, p_);
  double lp = -0.5 * w.squaredNorm();
  if (samples_.rows() > 0) {
    Eigen::PartialPivLU<Matrix> lu(w);
    const double det = lu.determinant();
    if (det == 0.0) throw SingularError("ica: singular unmixing matrix");
    lp += static_cast<double>(samples_.rows()) * std::log(std::abs(det));
    const Matrix u = w * samples_.transpose();
    for (Index i = 0; i < u.size(); ++i) lp -= log_cosh(u.data()[i]);
  }
  return lp;
}

Matrix ica_score(const Matrix& samples, const Matrix& w) {
  if (w.rows() != w.cols()) throw InputError("ica: W must be square");
  if (samples.rows() > 0 && samples.cols() != w.rows()) {
    throw InputError("ica: sample dimension differs from W");
  }
  Matrix s = samples.rows() > 0 ? samples : Matrix(0, w.rows());
  return IcaPosterior(std::move(s)).score_matrix(w);
}

// ---------------------------------------------------------------------------
// Annealing

AnnealedScore::AnnealedScore(ModelPtr base, double beta) : base_(std::move(base)), beta_(beta) {
  if (!base_) throw ConfigError("anneal: null base model");
  if (!(beta_ > 0.0 && beta_ <= 1.0)) throw ConfigError("anneal: beta must lie in (0, 1]");
}

Vector AnnealedScore::compute_score(PointRef x) const { return beta_ * base_->score(x); }

Matrix AnnealedScore::compute_jacobian(PointRef x) const {
  return beta_ * base_->score_jacobian(x);
}

double AnnealedScore::compute_log_density(PointRef x) const {
  return beta_ * *base_->log_density(x);
}

std::shared_ptr<const AnnealedScore> anneal(ModelPtr model, double beta) {
  return std::make_shared<const AnnealedScore>(std::move(model), beta);
}

}  // namespace ksdd
