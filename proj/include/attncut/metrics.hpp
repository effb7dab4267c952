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

// Cut-off metrics over binary-labelled ranked lists and the non-neural
// truncation baselines. Positions k are 1-based throughout.

#ifndef ATTNCUT_METRICS_HPP_
#define ATTNCUT_METRICS_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "attncut/data_model.hpp"

namespace attncut {

using Labels = std::span<const Relevance>;

Real precision_at(Labels labels, std::size_t k);
/// Defined as 0 when the list holds no relevant document.
Real recall_at(Labels labels, std::size_t k);
/// Harmonic mean of P@k and R@k; 0 when both are 0.
Real f1_at(Labels labels, std::size_t k);
/// Signed-gain DCG: sum of y_n / log2(n + 1) with y_n in {-1, +1}.
Real dcg_at(Labels labels, std::size_t k);
Real metric_at(Labels labels, std::size_t k, MetricName metric);

Real precision_at(const RankedList& list, std::size_t k);
Real recall_at(const RankedList& list, std::size_t k);
Real f1_at(const RankedList& list, std::size_t k);
Real dcg_at(const RankedList& list, std::size_t k);
Real metric_at(const RankedList& list, std::size_t k, MetricName metric);

struct RewardVector {
  MetricName metric_name = MetricName::kF1;
  /// values[k-1] is the metric of the list cut at k.
  std::vector<Real> values;
};

/// Metric at every cut position in one O(N) prefix pass.
RewardVector reward_vector(Labels labels, MetricName metric);
RewardVector reward_vector(const RankedList& list, MetricName metric);

/// 1-based argmax with ties toward the smallest position.
std::size_t argmax_position(std::span<const Real> values);

TruncationDecision oracle_cut(const RankedList& list, MetricName metric);
TruncationDecision fixed_k_cut(const RankedList& list, std::size_t k, MetricName metric = MetricName::kF1);
/// Single k maximizing the mean metric over `train` (lists shorter than k
/// are cut at their end). Ties toward the smallest k.
std::size_t greedy_k_fit(const Dataset& train, MetricName metric);

}  // namespace attncut

#endif  // ATTNCUT_METRICS_HPP_
