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

#ifndef ATTNCUT_TRUNCATION_HPP_
#define ATTNCUT_TRUNCATION_HPP_

#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "attncut/data_model.hpp"
#include "attncut/model.hpp"

namespace attncut {

enum class Fallback { kFullList, kUnconstrainedArgmax };

std::string_view to_string(Fallback f);
Fallback parse_fallback(std::string_view s);

struct ConstraintConfig {
  Real sigma = 0;
  /// Used when no position is predicted to reach sigma.
  Fallback fallback = Fallback::kFullList;

  void validate() const;
};

/// Argmax cut of a distribution over positions, smallest position on ties.
TruncationDecision truncate_distribution(const std::string& query_id, std::span<const Real> p, MetricName metric);

/// Runs the model on normalized features and cuts at the argmax.
TruncationDecision truncate(const AttnCutModel& model, const RankedList& list, const Mat& features);

/// Per-position argmax bin of an N x B matrix of bin probabilities.
std::vector<int> predicted_bins(const Mat& recall_rows);

struct ConstrainedCut {
  std::size_t cut = 1;
  /// Smallest position predicted to reach sigma, when any.
  std::optional<std::size_t> first_feasible;
  bool fallback_used = false;
};

/// Cut selection under a minimal-recall constraint. A position counts as
/// feasible once some position at or before it is predicted to land in a
/// bin whose lower edge is at least sigma. The metric argmax is kept when
/// feasible; otherwise positions are tried in decreasing probability
/// (smaller position first on ties) until one is feasible.
ConstrainedCut constrained_cut(std::span<const Real> p, const Mat& recall_rows, const std::vector<Real>& edges,
                               const ConstraintConfig& cfg);

TruncationDecision constrained_truncate(const AttnCutModel& metric_model, const RecallConstraintModel& recall_model,
                                        const RankedList& list, const Mat& features, const ConstraintConfig& cfg);

/// Fills achieved_metric / achieved_recall from the list labels. Left empty
/// for unlabeled lists.
void fill_achieved(TruncationDecision& d, const RankedList& list);

struct EvaluationSummary {
  MetricName metric = MetricName::kF1;
  /// Aligned with the dataset's list order.
  std::vector<std::string> query_ids;
  std::vector<Real> per_query_metric;
  std::vector<Real> per_query_recall;
  std::vector<std::size_t> cut_positions;
  Real mean_metric = 0;
  Real mean_recall = 0;
  /// Queries whose achieved recall reaches sigma (all of them without sigma).
  std::size_t meeting_sigma = 0;
};

/// Scores one decision per test list. Decisions are matched by query id.
/// Throws DataError on a missing, duplicated or out-of-range decision.
EvaluationSummary evaluate(std::span<const TruncationDecision> decisions, const Dataset& test, MetricName metric,
                           std::optional<Real> sigma = std::nullopt);

/// One JSON object per line: query_id, cut_position, metric_name,
/// achieved_metric, achieved_recall, constrained, fallback_used. The
/// achieved fields are left out when unknown.
void write_decisions(std::ostream& out, std::span<const TruncationDecision> decisions);
std::vector<TruncationDecision> read_decisions(std::istream& in);

}  // namespace attncut

#endif  // ATTNCUT_TRUNCATION_HPP_
