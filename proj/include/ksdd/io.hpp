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

#include "ksdd/targets.hpp"
#include "ksdd/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace ksdd {

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double value);

/// Numeric CSV with a single header line.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;

  /// Column index of `name`, or -1.
  Index column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Matrix& values);

/// {prefix}1, {prefix}2, ..., {prefix}n
std::vector<std::string> numbered_header(const std::string& prefix, Index n);

/// Particle positions, one row per particle, header x1..xd.
void write_particles_csv(const std::filesystem::path& path, const Positions& positions);
Positions read_particles_csv(const std::filesystem::path& path);

/// Labeled CSV: a column named `y` with values in {-1, +1}; every other
/// column is a numeric feature. Throws InputError on an empty file, a
/// missing `y` column or a bad label.
LabeledDataset read_labeled_csv(const std::filesystem::path& path);
/// Writes header y,f1..fp.
void write_labeled_csv(const std::filesystem::path& path, const LabeledDataset& data);

/// Per-feature affine map to zero mean and unit variance, fitted on one
/// dataset and applied to others. Constant features keep unit scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix& features);
  Matrix apply(const Matrix& features) const;
};

}  // namespace ksdd
