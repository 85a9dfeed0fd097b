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

#include "ksdd/config.hpp"
#include "ksdd/flows.hpp"
#include "ksdd/targets.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ksdd {

/// Environment variable that overrides `output_dir` in experiment configs.
inline constexpr const char* kOutputDirEnv = "KSDD_OUTPUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitDiverged = 2, kExitInternal = 3 };

struct ExperimentOutcome {
  int exit_code = kExitOk;
  std::string message;
  std::filesystem::path output_dir;
  nlohmann::json metrics;
};

/// Runs the experiment named by the `experiment` key. Configuration, input
/// and I/O problems map to exit code 1, a diverged flow to exit code 2
/// (outputs are still written). The output directory is, in order of
/// precedence: `output_override`, $KSDD_OUTPUT_DIR, the `output_dir` key.
ExperimentOutcome run_experiment(const Config& cfg,
                                 const std::optional<std::filesystem::path>& output_override = {});
ExperimentOutcome run_experiment_file(const std::filesystem::path& path,
                                      const std::optional<std::filesystem::path>& output_override = {});

struct IcaDataset {
  /// q x p observations x_n = A s_n with A = W^{-1}.
  Matrix samples;
  /// Ground-truth unmixing matrix W.
  Matrix unmixing;
};

/// Sources are i.i.d. with density (1/pi) sech(s), matching the model's
/// log cosh prior; W has N(0, 1) entries and is redrawn while its
/// condition number exceeds 1e3.
IcaDataset make_ica_dataset(Index p, Index q, std::uint64_t seed);

struct LogregData {
  LabeledDataset train;
  LabeledDataset test;
  Vector truth;
};

/// Linearly separable data: features N(0, I), labels sign(w . f) for a
/// random unit w, keeping only points with |w . f| >= margin.
LogregData make_logreg_dataset(Index p, Index train_size, Index test_size, double margin,
                               std::uint64_t seed);

/// Writes the dataset described by `spec` (keys: dataset = ica | logreg,
/// seed, output, and ica.* or logreg.* sizes). Returns the files written.
std::vector<std::filesystem::path> generate_dataset(const Config& spec);

struct CheckRow {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// Finite-difference checks of every kernel, score and Stein-kernel
/// derivative plus Monte-Carlo Stein identity checks on sampleable targets.
std::vector<CheckRow> run_check_suite(std::uint64_t seed);

}  // namespace ksdd
