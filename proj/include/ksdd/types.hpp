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

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

namespace ksdd {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Particle positions, one particle per row.
using Positions = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Read-only view of a point. Rows of a `Positions` matrix bind without a copy
/// through `positions.row(i).transpose()`.
using PointRef = Eigen::Ref<const Vector>;

void require_same_dim(PointRef x, PointRef y, std::string_view what);
void require_dim(PointRef x, Index dim, std::string_view what);
void require_finite(PointRef x, std::string_view what);

}  // namespace ksdd
