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

// TREC run / qrels parsing, dataset assembly, synthetic data and splits.

#ifndef ATTNCUT_INGESTION_HPP_
#define ATTNCUT_INGESTION_HPP_

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "attncut/data_model.hpp"

namespace attncut {

using WarningSink = std::function<void(const std::string&)>;

/// Writes "warning: ..." lines to std::clog.
WarningSink clog_warnings();

struct RunRecord {
  std::string query_id;
  std::string doc_id;
  int rank = 1;
  Real score = 0;
  std::string tag;

  bool operator==(const RunRecord&) const = default;
};

struct QrelRecord {
  std::string query_id;
  std::string doc_id;
  int grade = 0;

  bool operator==(const QrelRecord&) const = default;
};

/// `qid Q0 docid rank score tag` per line; blank lines are skipped.
std::vector<RunRecord> parse_run_file(std::istream& in);

struct QrelOptions {
  /// Map negative grades to 0 instead of rejecting them.
  bool clamp_negative = false;
};

/// `qid iteration docid grade` per line. Duplicate (qid, docid) pairs keep
/// the last record and emit a warning.
std::vector<QrelRecord> parse_qrels(std::istream& in, const QrelOptions& options = {},
                                    const WarningSink& warn = clog_warnings());

struct DocStats {
  long length = 0;
  long unique_tokens = 0;
  std::vector<Real> vector;
};

/// Per-document statistics provider for dataset assembly.
class DocStatsSource {
 public:
  virtual ~DocStatsSource() = default;
  virtual const DocStats* find(const std::string& doc_id) const = 0;
  /// Name of the vector space the similarity vectors come from.
  virtual std::string vector_space() const = 0;
};

/// JSONL-backed source: one `{doc_id, length, unique_tokens, vector}` object
/// per line.
class JsonlDocStats : public DocStatsSource {
 public:
  static JsonlDocStats parse(std::istream& in, std::string vector_space = "unspecified");

  const DocStats* find(const std::string& doc_id) const override;
  std::string vector_space() const override { return vector_space_; }
  void insert(std::string doc_id, DocStats stats) { stats_[std::move(doc_id)] = std::move(stats); }

 private:
  std::map<std::string, DocStats> stats_;
  std::string vector_space_ = "unspecified";
};

/// Cosine of two vectors; 0 when either has zero norm.
Real cosine_similarity(const std::vector<Real>& a, const std::vector<Real>& b);

struct AssembleOptions {
  std::size_t truncate_to = 300;
  /// Drop queries with no judgments instead of keeping them all non-relevant.
  bool drop_unjudged_queries = false;
};

/// Groups runs per query (sorted by query id), orders by rank, truncates,
/// and labels grade > 0 as relevant. Unjudged documents are non-relevant.
Dataset assemble_dataset(const std::vector<RunRecord>& runs, const std::vector<QrelRecord>& qrels,
                         const DocStatsSource& doc_stats, const AssembleOptions& options,
                         const WarningSink& warn = clog_warnings());

struct SyntheticConfig {
  std::size_t n_queries = 250;
  std::size_t list_length = 100;
  Real relevant_fraction = 0.2;
  Real relevant_score_mean = 5.0;
  Real relevant_score_std = 1.0;
  Real nonrelevant_rate = 1.0;
  long doc_length_min = 50;
  long doc_length_max = 1000;
  /// Similarity of neighbours is 2 exp(-gap / scale) - 1.
  Real similarity_gap_scale = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

/// Normal scores for relevant documents, exponential scores for the rest,
/// ranked by descending score. Deterministic under `seed`.
Dataset generate_synthetic(const SyntheticConfig& cfg);

/// Query-level random split; both halves keep the input query order.
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, Real train_fraction, std::uint64_t seed);

}  // namespace attncut

#endif  // ATTNCUT_INGESTION_HPP_
