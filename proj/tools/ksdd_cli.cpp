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

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <string>

namespace {

void print_line(const char* line, void* /*user*/) { std::printf("%s\n", line); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel Stein discrepancy descent experiments"};
  app.set_version_flag("--version", std::string(ksdd_version()));
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", config_path, "Experiment config (key = value lines)")->required();
  run->add_option("-o,--output-dir", output_dir, "Override the output directory");

  std::string spec_path;
  auto* generate = app.add_subcommand("generate", "Write a synthetic ICA or logistic dataset");
  generate->add_option("spec", spec_path, "Dataset spec (key = value lines)")->required();

  std::uint64_t seed = 1;
  auto* check = app.add_subcommand("check", "Finite-difference and Stein identity checks");
  check->add_option("--seed", seed, "Random seed for the check inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (run->parsed()) {
    int exit_code = 0;
    const ksdd_status st = ksdd_experiment_run(config_path.c_str(), output_dir.empty() ? nullptr : output_dir.c_str(),
                                               &exit_code);
    if (st != KSDD_OK) std::fprintf(stderr, "ksdd: %s: %s\n", ksdd_status_string(st), ksdd_last_error());
    return exit_code;
  }
  if (generate->parsed()) {
    const ksdd_status st = ksdd_generate(spec_path.c_str(), print_line, nullptr);
    if (st != KSDD_OK) {
      std::fprintf(stderr, "ksdd: %s: %s\n", ksdd_status_string(st), ksdd_last_error());
      return 1;
    }
    return 0;
  }
  int all_passed = 0;
  const ksdd_status st = ksdd_check(seed, print_line, nullptr, &all_passed);
  if (st != KSDD_OK) {
    std::fprintf(stderr, "ksdd: %s: %s\n", ksdd_status_string(st), ksdd_last_error());
    return 3;
  }
  std::printf("%s\n", all_passed ? "all checks passed" : "some checks FAILED");
  return all_passed ? 0 : 1;
}
