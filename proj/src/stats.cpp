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

#include "attncut/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace attncut {

namespace {
constexpr std::size_t kExactLimit = 25;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw std::invalid_argument("wilcoxon needs paired samples of equal length");
  std::vector<Real> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real d = a[i] - b[i];
    if (!std::isfinite(d)) throw std::invalid_argument("wilcoxon needs finite samples");
    if (d != 0) diffs.push_back(d);
  }
  WilcoxonResult res;
  res.n = diffs.size();
  if (diffs.empty()) return res;

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(diffs[i]) < std::abs(diffs[j]); });
  std::vector<Real> ranks(n);
  Real tie_term = 0;
  bool ties = false;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const Real avg = 0.5 * static_cast<Real>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    const auto t = static_cast<Real>(j - i + 1);
    if (j > i) ties = true;
    tie_term += t * t * t - t;
    i = j + 1;
  }
  Real w_plus = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0) w_plus += ranks[i];
  }
  res.statistic = w_plus;

  if (!ties && n <= kExactLimit) {
    // counts[s]: sign assignments whose positive ranks sum to s.
    const std::size_t max_sum = n * (n + 1) / 2;
    std::vector<Real> counts(max_sum + 1, 0.0);
    counts[0] = 1;
    for (std::size_t r = 1; r <= n; ++r) {
      for (std::size_t s = max_sum; s >= r; --s) counts[s] += counts[s - r];
    }
    const Real total = std::ldexp(1.0, static_cast<int>(n));
    const auto w = static_cast<std::size_t>(std::llround(w_plus));
    Real lower = 0;
    Real upper = 0;
    for (std::size_t s = 0; s <= max_sum; ++s) {
      if (s <= w) lower += counts[s];
      if (s >= w) upper += counts[s];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / total);
    res.exact = true;
    return res;
  }
  const auto nn = static_cast<Real>(n);
  const Real mean = nn * (nn + 1) / 4;
  const Real var = nn * (nn + 1) * (2 * nn + 1) / 24 - tie_term / 48;
  if (var <= 0) return res;
  const Real z = (w_plus - mean) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  return res;
}

}  // namespace attncut
