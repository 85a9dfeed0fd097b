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

/* C interface to the ksdd library. Every function returns a ksdd_status;
 * on failure ksdd_last_error() describes the problem for the calling
 * thread. Handles are opaque and must be released with the matching
 * destroy function. Particle arrays are row-major, n rows of d doubles. */
#ifndef KSDD_KSDD_H_
#define KSDD_KSDD_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(KSDD_BUILDING_LIBRARY)
#define KSDD_API __declspec(dllexport)
#else
#define KSDD_API __declspec(dllimport)
#endif
#else
#define KSDD_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ksdd_status {
  KSDD_OK = 0,
  KSDD_ERR_INPUT = 1,
  KSDD_ERR_CONFIG = 2,
  KSDD_ERR_DIVERGED = 3,
  KSDD_ERR_SINGULAR = 4,
  KSDD_ERR_UNSUPPORTED = 5,
  KSDD_ERR_IO = 6,
  KSDD_ERR_INTERNAL = 7
} ksdd_status;

typedef struct ksdd_kernel ksdd_kernel;
typedef struct ksdd_model ksdd_model;
typedef struct ksdd_particles ksdd_particles;

typedef enum ksdd_scheme {
  KSDD_SCHEME_KSD_GD = 0,
  KSDD_SCHEME_KSD_LBFGS = 1,
  KSDD_SCHEME_SVGD = 2,
  KSDD_SCHEME_MMD_GD = 3
} ksdd_scheme;

typedef struct ksdd_flow_options {
  ksdd_scheme scheme;
  double step_size;
  int max_iters;
  double tol;
  int backtracking;
  /* Optional annealing schedule: betas[i] with iteration budgets iters[i]
   * (a budget <= 0 means max_iters). n_stages = 0 runs at beta = 1. */
  const double* anneal_betas;
  const int* anneal_iters;
  size_t n_stages;
} ksdd_flow_options;

typedef struct ksdd_flow_result {
  int status; /* 0 converged, 1 max_iters, 2 diverged, 3 stalled */
  int iterations;
  double initial_loss;
  double final_loss;
  double final_grad_norm;
} ksdd_flow_result;

typedef void (*ksdd_line_callback)(const char* line, void* user);

KSDD_API const char* ksdd_version(void);
KSDD_API const char* ksdd_last_error(void);
KSDD_API const char* ksdd_status_string(ksdd_status status);

/* Fills `options` with the library defaults for `scheme`. */
KSDD_API void ksdd_flow_options_default(ksdd_flow_options* options, ksdd_scheme scheme);

/* Base kernels. */
KSDD_API ksdd_status ksdd_kernel_create_gaussian(double bandwidth, ksdd_kernel** out);
KSDD_API ksdd_status ksdd_kernel_create_imq(double c, double beta, ksdd_kernel** out);
KSDD_API void ksdd_kernel_destroy(ksdd_kernel* kernel);
KSDD_API ksdd_status ksdd_kernel_eval(const ksdd_kernel* kernel, const double* x, const double* y, size_t d,
                                      double* out);

/* Score models. */
KSDD_API ksdd_status ksdd_model_create_gaussian(const double* mean, const double* covariance, size_t d,
                                                ksdd_model** out);
KSDD_API ksdd_status ksdd_model_create_mixture_pair(size_t d, double centroid, double variance,
                                                    ksdd_model** out);
KSDD_API ksdd_status ksdd_model_create_banana(double a, double b, ksdd_model** out);
/* features: q x p row-major; labels in {-1, +1}. */
KSDD_API ksdd_status ksdd_model_create_logistic(const double* features, const double* labels, size_t q, size_t p,
                                                double prior_rate, ksdd_model** out);
/* samples: q x p row-major observations. */
KSDD_API ksdd_status ksdd_model_create_ica(const double* samples, size_t q, size_t p, ksdd_model** out);
KSDD_API void ksdd_model_destroy(ksdd_model* model);
KSDD_API size_t ksdd_model_dim(const ksdd_model* model);
KSDD_API ksdd_status ksdd_model_score(const ksdd_model* model, const double* x, double* score_out);

/* Particle sets. */
KSDD_API ksdd_status ksdd_particles_create(const double* positions, size_t n, size_t d, ksdd_particles** out);
KSDD_API void ksdd_particles_destroy(ksdd_particles* particles);
KSDD_API size_t ksdd_particles_count(const ksdd_particles* particles);
KSDD_API size_t ksdd_particles_dim(const ksdd_particles* particles);
KSDD_API ksdd_status ksdd_particles_get(const ksdd_particles* particles, double* positions_out);

/* Stein kernel k_pi(x, y) for the given base kernel and model. */
KSDD_API ksdd_status ksdd_stein_kernel_eval(const ksdd_kernel* kernel, const ksdd_model* model, const double* x,
                                            const double* y, double* out);
/* KSD loss F and, when grad_out is not NULL, its n x d gradient. */
KSDD_API ksdd_status ksdd_ksd_loss(const ksdd_kernel* kernel, const ksdd_model* model,
                                   const ksdd_particles* particles, double* loss_out, double* grad_out);

/* Runs a flow and replaces the particle positions with the result. For
 * MMD_GD, `targets` holds m x d samples of the target; otherwise it may be
 * NULL. A diverged run returns KSDD_ERR_DIVERGED and leaves the particles
 * untouched. */
KSDD_API ksdd_status ksdd_flow_run(const ksdd_kernel* kernel, const ksdd_model* model,
                                   const ksdd_flow_options* options, const double* targets, size_t m,
                                   ksdd_particles* particles, ksdd_flow_result* result);

/* Experiment runner. `output_dir` may be NULL. `exit_code` receives the
 * CLI exit code (0 ok, 1 config, 2 divergence). */
KSDD_API ksdd_status ksdd_experiment_run(const char* config_path, const char* output_dir, int* exit_code);
KSDD_API ksdd_status ksdd_generate(const char* spec_path, ksdd_line_callback on_file, void* user);
/* Runs the derivative and Stein identity check suite. Each table row is
 * passed to `on_line`; `all_passed` receives 1 when every row passed. */
KSDD_API ksdd_status ksdd_check(uint64_t seed, ksdd_line_callback on_line, void* user, int* all_passed);

#ifdef __cplusplus
}
#endif

#endif /* KSDD_KSDD_H_ */
