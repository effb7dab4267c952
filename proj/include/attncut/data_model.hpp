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

// Canonical in-memory form of ranked lists, datasets and decisions.

#ifndef ATTNCUT_DATA_MODEL_HPP_
#define ATTNCUT_DATA_MODEL_HPP_

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace attncut {

using Real = double;
using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// Binary relevance label, +1 relevant / -1 non-relevant.
enum class Relevance : int { kNonRelevant = -1, kRelevant = 1 };

inline int label_value(Relevance r) { return static_cast<int>(r); }
inline bool is_relevant(Relevance r) { return r == Relevance::kRelevant; }

enum class MetricName { kF1, kDcg };

std::string_view to_string(MetricName m);
/// Accepts "f1" and "dcg".
MetricName parse_metric_name(std::string_view s);

enum class Split { kTrain, kTest };

std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct RankedDoc {
  std::string doc_id;
  int rank = 1;
  Real retrieval_score = 0;
  long doc_length = 0;
  long unique_tokens = 0;
  Real sim_prev = 0;
  Real sim_next = 0;
  Relevance relevance = Relevance::kNonRelevant;

  bool operator==(const RankedDoc&) const = default;
};

/// One query's candidate list. Construction validates ranks (exactly 1..N
/// in order), label consistency and boundary similarities.
class RankedList {
 public:
  RankedList(std::string query_id, std::vector<RankedDoc> docs, bool labeled = true);

  const std::string& query_id() const { return query_id_; }
  const std::vector<RankedDoc>& docs() const { return docs_; }
  std::size_t size() const { return docs_.size(); }
  /// Count of relevance = +1 documents.
  std::size_t n_relevant() const { return n_relevant_; }
  /// False when the source carried no judgments; labels are then all -1.
  bool labeled() const { return labeled_; }
  std::vector<Relevance> labels() const;

  bool operator==(const RankedList&) const = default;

 private:
  std::string query_id_;
  std::vector<RankedDoc> docs_;
  std::size_t n_relevant_ = 0;
  bool labeled_ = true;
};

inline constexpr std::size_t kFeatureDim = 5;

using FeatureLayout = std::vector<std::string>;

/// Slot names in feature order.
const FeatureLayout& default_feature_layout();

struct FeatureVector {
  Vec values;
  FeatureLayout layout;
};

/// [retrieval_score, doc_length, unique_tokens, sim_prev, sim_next].
FeatureVector build_feature_vector(const RankedDoc& doc);

/// N x kFeatureDim raw (unnormalized) feature rows of a list.
Mat raw_feature_matrix(const RankedList& list);

struct FeatureStats {
  Vec mean;
  Vec stddev;

  bool operator==(const FeatureStats& o) const { return mean == o.mean && stddev == o.stddev; }
};

struct Dataset {
  std::vector<RankedList> lists;
  Split split = Split::kTrain;
  std::optional<FeatureStats> feature_stats;
  /// Free-form provenance (similarity source, split fraction, seed, ...).
  std::map<std::string, std::string> metadata;
  /// Normalized N x kFeatureDim matrices, one per list; filled by
  /// normalize_features.
  std::vector<Mat> features;

  std::size_t max_list_length() const;
  bool operator==(const Dataset& o) const;
};

/// z-scores every feature slot. A train split gets fresh population
/// statistics; a test split must already carry the train statistics.
/// A zero-variance slot maps to 0.
Dataset normalize_features(Dataset ds);

/// Applies `stats` to one list's raw features.
Mat normalize_matrix(const Mat& raw, const FeatureStats& stats);

struct TruncationDecision {
  std::string query_id;
  std::size_t cut_position = 1;
  MetricName metric_name = MetricName::kF1;
  std::optional<std::vector<Real>> predicted_distribution;
  std::optional<Real> achieved_metric;
  std::optional<Real> achieved_recall;
  bool constrained = false;
  bool fallback_used = false;
};

}  // namespace attncut

#endif  // ATTNCUT_DATA_MODEL_HPP_
