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

#include "ksdd/ksdd.h"

#include "ksdd/errors.hpp"
#include "ksdd/experiments.hpp"
#include "ksdd/flows.hpp"
#include "ksdd/kernel.hpp"
#include "ksdd/stein.hpp"
#include "ksdd/targets.hpp"

#include <cstdio>
#include <new>
#include <string>

struct ksdd_kernel {
  ksdd::BaseKernel kernel;
};

struct ksdd_model {
  ksdd::ModelPtr model;
};

struct ksdd_particles {
  ksdd::Positions positions;
};

namespace {

thread_local std::string g_last_error;

ksdd_status fail(ksdd_status code, const char* what) {
  g_last_error = what;
  return code;
}

template <typename F>
ksdd_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const ksdd::InputError& e) {
    return fail(KSDD_ERR_INPUT, e.what());
  } catch (const ksdd::ConfigError& e) {
    return fail(KSDD_ERR_CONFIG, e.what());
  } catch (const ksdd::DivergenceError& e) {
    return fail(KSDD_ERR_DIVERGED, e.what());
  } catch (const ksdd::SingularError& e) {
    return fail(KSDD_ERR_SINGULAR, e.what());
  } catch (const ksdd::UnsupportedError& e) {
    return fail(KSDD_ERR_UNSUPPORTED, e.what());
  } catch (const ksdd::IoError& e) {
    return fail(KSDD_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(KSDD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(KSDD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(KSDD_ERR_INTERNAL, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw ksdd::InputError(what);
}

using RowMap = Eigen::Map<const ksdd::Positions>;

}  // namespace

extern "C" {

const char* ksdd_version(void) { return KSDD_VERSION; }

const char* ksdd_last_error(void) { return g_last_error.c_str(); }

const char* ksdd_status_string(ksdd_status status) {
  switch (status) {
    case KSDD_OK: return "ok";
    case KSDD_ERR_INPUT: return "input error";
    case KSDD_ERR_CONFIG: return "config error";
    case KSDD_ERR_DIVERGED: return "diverged";
    case KSDD_ERR_SINGULAR: return "singular";
    case KSDD_ERR_UNSUPPORTED: return "unsupported";
    case KSDD_ERR_IO: return "i/o error";
    case KSDD_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void ksdd_flow_options_default(ksdd_flow_options* options, ksdd_scheme scheme) {
  if (options == nullptr) return;
  const ksdd::FlowConfig fc;
  options->scheme = scheme;
  options->step_size = fc.step_size;
  options->max_iters = fc.max_iters;
  options->tol = fc.tol;
  options->backtracking = fc.backtracking ? 1 : 0;
  options->anneal_betas = nullptr;
  options->anneal_iters = nullptr;
  options->n_stages = 0;
}

ksdd_status ksdd_kernel_create_gaussian(double bandwidth, ksdd_kernel** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new ksdd_kernel{ksdd::BaseKernel::gaussian(bandwidth)};
    return KSDD_OK;
  });
}

ksdd_status ksdd_kernel_create_imq(double c, double beta, ksdd_kernel** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new ksdd_kernel{ksdd::BaseKernel::imq(c, beta)};
    return KSDD_OK;
  });
}

void ksdd_kernel_destroy(ksdd_kernel* kernel) { delete kernel; }

ksdd_status ksdd_kernel_eval(const ksdd_kernel* kernel, const double* x, const double* y, size_t d, double* out) {
  return guarded([&] {
    require(kernel && x && y && out, "null argument");
    const auto n = static_cast<ksdd::Index>(d);
    *out = kernel->kernel.eval(Eigen::Map<const ksdd::Vector>(x, n), Eigen::Map<const ksdd::Vector>(y, n));
    return KSDD_OK;
  });
}

ksdd_status ksdd_model_create_gaussian(const double* mean, const double* covariance, size_t d, ksdd_model** out) {
  return guarded([&] {
    require(mean && covariance && out, "null argument");
    const auto n = static_cast<ksdd::Index>(d);
    ksdd::Vector m = Eigen::Map<const ksdd::Vector>(mean, n);
    ksdd::Matrix c = RowMap(covariance, n, n);
    *out = new ksdd_model{std::make_shared<ksdd::GaussianModel>(std::move(m), std::move(c))};
    return KSDD_OK;
  });
}

ksdd_status ksdd_model_create_mixture_pair(size_t d, double centroid, double variance, ksdd_model** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new ksdd_model{
        ksdd::GaussianMixtureModel::symmetric_pair(static_cast<ksdd::Index>(d), centroid, variance)};
    return KSDD_OK;
  });
}

ksdd_status ksdd_model_create_banana(double a, double b, ksdd_model** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new ksdd_model{std::make_shared<ksdd::BananaModel>(a, b)};
    return KSDD_OK;
  });
}

ksdd_status ksdd_model_create_logistic(const double* features, const double* labels, size_t q, size_t p,
                                       double prior_rate, ksdd_model** out) {
  return guarded([&] {
    require(out != nullptr && (q == 0 || (features && labels)), "null argument");
    ksdd::LabeledDataset data;
    data.features = RowMap(features, static_cast<ksdd::Index>(q), static_cast<ksdd::Index>(p));
    data.labels = Eigen::Map<const ksdd::Vector>(labels, static_cast<ksdd::Index>(q));
    *out = new ksdd_model{std::make_shared<ksdd::LogisticPosterior>(std::move(data), prior_rate)};
    return KSDD_OK;
  });
}

ksdd_status ksdd_model_create_ica(const double* samples, size_t q, size_t p, ksdd_model** out) {
  return guarded([&] {
    require(samples && out, "null argument");
    ksdd::Matrix s = RowMap(samples, static_cast<ksdd::Index>(q), static_cast<ksdd::Index>(p));
    *out = new ksdd_model{std::make_shared<ksdd::IcaPosterior>(std::move(s))};
    return KSDD_OK;
  });
}

void ksdd_model_destroy(ksdd_model* model) { delete model; }

size_t ksdd_model_dim(const ksdd_model* model) {
  return model == nullptr ? 0 : static_cast<size_t>(model->model->dim());
}

ksdd_status ksdd_model_score(const ksdd_model* model, const double* x, double* score_out) {
  return guarded([&] {
    require(model && x && score_out, "null argument");
    const ksdd::Index d = model->model->dim();
    Eigen::Map<ksdd::Vector>(score_out, d) = model->model->score(Eigen::Map<const ksdd::Vector>(x, d));
    return KSDD_OK;
  });
}

ksdd_status ksdd_particles_create(const double* positions, size_t n, size_t d, ksdd_particles** out) {
  return guarded([&] {
    require(positions && out, "null argument");
    require(n > 0 && d > 0, "particle set must be non-empty");
    ksdd::Positions p = RowMap(positions, static_cast<ksdd::Index>(n), static_cast<ksdd::Index>(d));
    require(p.allFinite(), "non-finite particle coordinates");
    *out = new ksdd_particles{std::move(p)};
    return KSDD_OK;
  });
}

void ksdd_particles_destroy(ksdd_particles* particles) { delete particles; }

size_t ksdd_particles_count(const ksdd_particles* particles) {
  return particles == nullptr ? 0 : static_cast<size_t>(particles->positions.rows());
}

size_t ksdd_particles_dim(const ksdd_particles* particles) {
  return particles == nullptr ? 0 : static_cast<size_t>(particles->positions.cols());
}

ksdd_status ksdd_particles_get(const ksdd_particles* particles, double* positions_out) {
  return guarded([&] {
    require(particles && positions_out, "null argument");
    const auto& p = particles->positions;
    Eigen::Map<ksdd::Positions>(positions_out, p.rows(), p.cols()) = p;
    return KSDD_OK;
  });
}

ksdd_status ksdd_stein_kernel_eval(const ksdd_kernel* kernel, const ksdd_model* model, const double* x,
                                   const double* y, double* out) {
  return guarded([&] {
    require(kernel && model && x && y && out, "null argument");
    const ksdd::SteinKernel sk(kernel->kernel, model->model);
    const ksdd::Index d = sk.dim();
    *out = sk.kpi(Eigen::Map<const ksdd::Vector>(x, d), Eigen::Map<const ksdd::Vector>(y, d));
    return KSDD_OK;
  });
}

ksdd_status ksdd_ksd_loss(const ksdd_kernel* kernel, const ksdd_model* model, const ksdd_particles* particles,
                          double* loss_out, double* grad_out) {
  return guarded([&] {
    require(kernel && model && particles && loss_out, "null argument");
    const ksdd::SteinKernel sk(kernel->kernel, model->model);
    const auto eval = ksdd::evaluate_particles(sk, particles->positions, grad_out != nullptr);
    *loss_out = ksdd::ksd_loss(eval);
    if (grad_out != nullptr) {
      const ksdd::Positions g = ksdd::ksd_grad(eval);
      Eigen::Map<ksdd::Positions>(grad_out, g.rows(), g.cols()) = g;
    }
    return KSDD_OK;
  });
}

ksdd_status ksdd_flow_run(const ksdd_kernel* kernel, const ksdd_model* model, const ksdd_flow_options* options,
                          const double* targets, size_t m, ksdd_particles* particles, ksdd_flow_result* result) {
  return guarded([&] {
    require(kernel && model && options && particles, "null argument");
    require(options->n_stages == 0 || options->anneal_betas != nullptr, "annealing schedule without betas");
    ksdd::FlowConfig fc;
    switch (options->scheme) {
      case KSDD_SCHEME_KSD_GD: fc.scheme = ksdd::Scheme::KsdGd; break;
      case KSDD_SCHEME_KSD_LBFGS: fc.scheme = ksdd::Scheme::KsdLbfgs; break;
      case KSDD_SCHEME_SVGD: fc.scheme = ksdd::Scheme::Svgd; break;
      case KSDD_SCHEME_MMD_GD: fc.scheme = ksdd::Scheme::MmdGd; break;
      default: throw ksdd::ConfigError("unknown scheme");
    }
    fc.step_size = options->step_size;
    fc.max_iters = options->max_iters;
    fc.tol = options->tol;
    fc.backtracking = options->backtracking != 0;
    fc.snapshot_every = 0;
    for (size_t s = 0; s < options->n_stages; ++s) {
      ksdd::AnnealStage st;
      st.beta = options->anneal_betas[s];
      if (options->anneal_iters != nullptr && options->anneal_iters[s] > 0) st.iters = options->anneal_iters[s];
      fc.anneal_schedule.push_back(st);
    }
    ksdd::FlowInputs inputs{kernel->kernel, model->model, {}};
    if (targets != nullptr && m > 0) {
      inputs.target_samples = RowMap(targets, static_cast<ksdd::Index>(m), particles->positions.cols());
    }
    ksdd::ParticleSet init;
    init.positions = particles->positions;
    const ksdd::FlowTrace trace = ksdd::run_flow(fc, inputs, init);
    if (result != nullptr) {
      result->status = static_cast<int>(trace.status);
      result->iterations = static_cast<int>(trace.final.iteration);
      result->initial_loss = trace.initial_loss;
      result->final_loss = trace.final_loss;
      result->final_grad_norm = trace.final_grad_norm;
    }
    if (trace.status == ksdd::FlowStatus::Diverged) throw ksdd::DivergenceError(trace.message);
    particles->positions = trace.final.positions;
    return KSDD_OK;
  });
}

ksdd_status ksdd_experiment_run(const char* config_path, const char* output_dir, int* exit_code) {
  return guarded([&] {
    require(config_path && exit_code, "null argument");
    std::optional<std::filesystem::path> override_dir;
    if (output_dir != nullptr && *output_dir != '\0') override_dir = output_dir;
    const ksdd::ExperimentOutcome outcome = ksdd::run_experiment_file(config_path, override_dir);
    *exit_code = outcome.exit_code;
    switch (outcome.exit_code) {
      case ksdd::kExitOk: return KSDD_OK;
      case ksdd::kExitConfig: return fail(KSDD_ERR_CONFIG, outcome.message.c_str());
      case ksdd::kExitDiverged: return fail(KSDD_ERR_DIVERGED, outcome.message.c_str());
      default: return fail(KSDD_ERR_INTERNAL, outcome.message.c_str());
    }
  });
}

ksdd_status ksdd_generate(const char* spec_path, ksdd_line_callback on_file, void* user) {
  return guarded([&] {
    require(spec_path != nullptr, "null argument");
    const auto files = ksdd::generate_dataset(ksdd::Config::load(spec_path));
    if (on_file != nullptr) {
      for (const auto& f : files) on_file(f.string().c_str(), user);
    }
    return KSDD_OK;
  });
}

ksdd_status ksdd_check(uint64_t seed, ksdd_line_callback on_line, void* user, int* all_passed) {
  return guarded([&] {
    const auto rows = ksdd::run_check_suite(seed);
    bool ok = true;
    char buf[256];
    for (const auto& r : rows) {
      ok = ok && r.pass;
      std::snprintf(buf, sizeof(buf), "%-44s %12.3e  < %-9.2e %s", r.name.c_str(), r.value, r.threshold,
                    r.pass ? "PASS" : "FAIL");
      if (on_line != nullptr) on_line(buf, user);
    }
    if (all_passed != nullptr) *all_passed = ok ? 1 : 0;
    return KSDD_OK;
  });
}

}  // extern "C"
