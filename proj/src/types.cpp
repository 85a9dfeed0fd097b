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

#include "ksdd/types.hpp"

#include "ksdd/errors.hpp"

#include <string>

namespace ksdd {

void require_same_dim(PointRef x, PointRef y, std::string_view what) {
  if (x.size() != y.size()) {
    throw InputError(std::string(what) + ": dimension mismatch (" + std::to_string(x.size()) +
                     " vs " + std::to_string(y.size()) + ")");
  }
}

void require_dim(PointRef x, Index dim, std::string_view what) {
  if (x.size() != dim) {
    throw InputError(std::string(what) + ": expected dimension " + std::to_string(dim) + ", got " +
                     std::to_string(x.size()));
  }
}

void require_finite(PointRef x, std::string_view what) {
  if (!x.allFinite()) {
    throw InputError(std::string(what) + ": non-finite coordinates");
  }
}

}  // namespace ksdd
