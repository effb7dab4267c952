// Copyright 2026 The attncut Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ATTNCUT_STATS_HPP_
#define ATTNCUT_STATS_HPP_

#include <cstddef>
#include <span>

#include "attncut/data_model.hpp"

namespace attncut {

struct WilcoxonResult {
  /// Sum of the ranks of positive differences.
  Real statistic = 0;
  Real p_value = 1;
  /// Pairs left after dropping zero differences.
  std::size_t n = 0;
  bool exact = false;
};

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; with none left the p-value is 1. Small samples without tied
/// magnitudes use the exact null distribution, the rest the normal
/// approximation with a tie correction.
WilcoxonResult wilcoxon_signed_rank(std::span<const Real> a, std::span<const Real> b);

}  // namespace attncut

#endif  // ATTNCUT_STATS_HPP_
