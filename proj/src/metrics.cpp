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

#include "attncut/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "attncut/errors.hpp"

namespace attncut {
namespace {

void check_k(Labels labels, std::size_t k) {
  if (k < 1 || k > labels.size()) {
    throw std::out_of_range("cut position " + std::to_string(k) + " outside [1," +
                            std::to_string(labels.size()) + "]");
  }
}

std::size_t relevant_prefix(Labels labels, std::size_t k) {
  return static_cast<std::size_t>(
      std::count(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(k), Relevance::kRelevant));
}

std::size_t relevant_total(Labels labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Relevance::kRelevant));
}

// The prefix pass and the per-k functions share these two expressions so
// both routes produce bit-identical values.
Real f1_from_counts(std::size_t hits, std::size_t k, std::size_t total) {
  const Real p = static_cast<Real>(hits) / static_cast<Real>(k);
  const Real r = total == 0 ? 0.0 : static_cast<Real>(hits) / static_cast<Real>(total);
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

Real dcg_gain(Relevance y, std::size_t n) { return label_value(y) / std::log2(static_cast<Real>(n) + 1); }

}  // namespace

Real precision_at(Labels labels, std::size_t k) {
  check_k(labels, k);
  return static_cast<Real>(relevant_prefix(labels, k)) / static_cast<Real>(k);
}

Real recall_at(Labels labels, std::size_t k) {
  check_k(labels, k);
  const std::size_t total = relevant_total(labels);
  return total == 0 ? 0.0 : static_cast<Real>(relevant_prefix(labels, k)) / static_cast<Real>(total);
}

Real f1_at(Labels labels, std::size_t k) {
  check_k(labels, k);
  return f1_from_counts(relevant_prefix(labels, k), k, relevant_total(labels));
}

Real dcg_at(Labels labels, std::size_t k) {
  check_k(labels, k);
  Real s = 0;
  for (std::size_t n = 1; n <= k; ++n) s += dcg_gain(labels[n - 1], n);
  return s;
}

Real metric_at(Labels labels, std::size_t k, MetricName metric) {
  return metric == MetricName::kF1 ? f1_at(labels, k) : dcg_at(labels, k);
}

Real precision_at(const RankedList& list, std::size_t k) { return precision_at(list.labels(), k); }
Real recall_at(const RankedList& list, std::size_t k) { return recall_at(list.labels(), k); }
Real f1_at(const RankedList& list, std::size_t k) { return f1_at(list.labels(), k); }
Real dcg_at(const RankedList& list, std::size_t k) { return dcg_at(list.labels(), k); }
Real metric_at(const RankedList& list, std::size_t k, MetricName metric) {
  return metric_at(list.labels(), k, metric);
}

RewardVector reward_vector(Labels labels, MetricName metric) {
  RewardVector rv;
  rv.metric_name = metric;
  rv.values.resize(labels.size());
  if (metric == MetricName::kF1) {
    const std::size_t total = relevant_total(labels);
    std::size_t hits = 0;
    for (std::size_t k = 1; k <= labels.size(); ++k) {
      if (is_relevant(labels[k - 1])) ++hits;
      rv.values[k - 1] = f1_from_counts(hits, k, total);
    }
  } else {
    Real s = 0;
    for (std::size_t k = 1; k <= labels.size(); ++k) {
      s += dcg_gain(labels[k - 1], k);
      rv.values[k - 1] = s;
    }
  }
  return rv;
}

RewardVector reward_vector(const RankedList& list, MetricName metric) {
  return reward_vector(list.labels(), metric);
}

std::size_t argmax_position(std::span<const Real> values) {
  if (values.empty()) throw std::invalid_argument("argmax over an empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best + 1;
}

TruncationDecision oracle_cut(const RankedList& list, MetricName metric) {
  const RewardVector rv = reward_vector(list, metric);
  TruncationDecision d;
  d.query_id = list.query_id();
  d.metric_name = metric;
  d.cut_position = argmax_position(rv.values);
  d.achieved_metric = rv.values[d.cut_position - 1];
  d.achieved_recall = recall_at(list, d.cut_position);
  return d;
}

TruncationDecision fixed_k_cut(const RankedList& list, std::size_t k, MetricName metric) {
  if (k < 1) throw ConfigError("fixed-k cut needs k >= 1");
  TruncationDecision d;
  d.query_id = list.query_id();
  d.metric_name = metric;
  d.cut_position = std::min(k, list.size());
  return d;
}

std::size_t greedy_k_fit(const Dataset& train, MetricName metric) {
  if (train.lists.empty()) throw ConfigError("greedy-k needs a non-empty training set");
  const std::size_t max_n = train.max_list_length();
  std::vector<Real> totals(max_n, 0.0);
  for (const auto& list : train.lists) {
    const RewardVector rv = reward_vector(list, metric);
    for (std::size_t k = 1; k <= max_n; ++k) totals[k - 1] += rv.values[std::min(k, list.size()) - 1];
  }
  // Equal list counts make argmax of the sum identical to argmax of the mean.
  return argmax_position(totals);
}

}  // namespace attncut
