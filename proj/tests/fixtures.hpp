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

#ifndef ATTNCUT_TESTS_FIXTURES_HPP_
#define ATTNCUT_TESTS_FIXTURES_HPP_

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "attncut/data_model.hpp"

namespace attncut::testing {

/// List with descending scores and the given +1/-1 labels.
inline RankedList make_list(const std::string& qid, const std::vector<int>& labels, bool labeled = true) {
  std::vector<RankedDoc> docs;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    RankedDoc d;
    d.doc_id = qid + "-d" + std::to_string(i);
    d.rank = static_cast<int>(i + 1);
    d.retrieval_score = 10.0 - static_cast<Real>(i) * 0.5;
    d.doc_length = 100 + static_cast<long>(i);
    d.unique_tokens = 50 + static_cast<long>(i % 7);
    d.sim_prev = i == 0 ? 0.0 : 0.5;
    d.sim_next = i + 1 == labels.size() ? 0.0 : 0.5;
    d.relevance = labels[i] > 0 ? Relevance::kRelevant : Relevance::kNonRelevant;
    docs.push_back(d);
  }
  return RankedList(qid, std::move(docs), labeled);
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, double p_rel) {
  std::bernoulli_distribution b(p_rel);
  std::vector<int> out(n);
  for (auto& v : out) v = b(rng) ? 1 : -1;
  return out;
}

inline std::vector<Relevance> to_relevance(const std::vector<int>& labels) {
  std::vector<Relevance> out;
  for (int v : labels) out.push_back(v > 0 ? Relevance::kRelevant : Relevance::kNonRelevant);
  return out;
}

// Straightforward per-k recomputation used as an independent oracle.
inline Real naive_metric(const std::vector<int>& labels, std::size_t k, MetricName metric) {
  std::size_t total_rel = 0;
  for (int v : labels) total_rel += v > 0 ? 1 : 0;
  std::size_t rel = 0;
  Real dcg = 0;
  for (std::size_t n = 1; n <= k; ++n) {
    rel += labels[n - 1] > 0 ? 1 : 0;
    dcg += static_cast<Real>(labels[n - 1]) / std::log2(static_cast<Real>(n) + 1);
  }
  if (metric == MetricName::kDcg) return dcg;
  const Real p = static_cast<Real>(rel) / static_cast<Real>(k);
  const Real r = total_rel == 0 ? 0.0 : static_cast<Real>(rel) / static_cast<Real>(total_rel);
  return p + r == 0 ? 0.0 : 2 * p * r / (p + r);
}

}  // namespace attncut::testing

#endif  // ATTNCUT_TESTS_FIXTURES_HPP_
