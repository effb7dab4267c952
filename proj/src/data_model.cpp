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

#include "attncut/data_model.hpp"

#include <algorithm>
#include <cmath>

#include "attncut/errors.hpp"

namespace attncut {

std::string_view to_string(MetricName m) { return m == MetricName::kF1 ? "f1" : "dcg"; }

MetricName parse_metric_name(std::string_view s) {
  if (s == "f1") return MetricName::kF1;
  if (s == "dcg") return MetricName::kDcg;
  throw ConfigError("unknown metric '" + std::string(s) + "' (expected f1 or dcg)");
}

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

RankedList::RankedList(std::string query_id, std::vector<RankedDoc> docs, bool labeled)
    : query_id_(std::move(query_id)), docs_(std::move(docs)), labeled_(labeled) {
  if (docs_.empty()) throw DataError("ranked list '" + query_id_ + "' is empty");
  for (std::size_t i = 0; i < docs_.size(); ++i) {
    const auto& d = docs_[i];
    if (d.rank != static_cast<int>(i) + 1) {
      throw DataError("ranked list '" + query_id_ + "': expected rank " + std::to_string(i + 1) +
                      " at position " + std::to_string(i + 1) + ", got " + std::to_string(d.rank));
    }
    if (d.doc_length < 0 || d.unique_tokens < 0) {
      throw DataError("ranked list '" + query_id_ + "': negative document statistics for '" + d.doc_id + "'");
    }
    if (!std::isfinite(d.retrieval_score)) {
      throw DataError("ranked list '" + query_id_ + "': non-finite score for '" + d.doc_id + "'");
    }
    if (!labeled_ && is_relevant(d.relevance)) {
      throw DataError("ranked list '" + query_id_ + "' is unlabeled but carries a relevant label");
    }
    if (is_relevant(d.relevance)) ++n_relevant_;
  }
  if (docs_.front().sim_prev != 0 || docs_.back().sim_next != 0) {
    throw DataError("ranked list '" + query_id_ + "': boundary similarities must be 0");
  }
}

std::vector<Relevance> RankedList::labels() const {
  std::vector<Relevance> out;
  out.reserve(docs_.size());
  for (const auto& d : docs_) out.push_back(d.relevance);
  return out;
}

const FeatureLayout& default_feature_layout() {
  static const FeatureLayout layout = {"retrieval_score", "doc_length", "unique_tokens", "sim_prev",
                                       "sim_next"};
  return layout;
}

FeatureVector build_feature_vector(const RankedDoc& doc) {
  FeatureVector fv;
  fv.values.resize(kFeatureDim);
  fv.values << doc.retrieval_score, static_cast<Real>(doc.doc_length), static_cast<Real>(doc.unique_tokens),
      doc.sim_prev, doc.sim_next;
  fv.layout = default_feature_layout();
  return fv;
}

Mat raw_feature_matrix(const RankedList& list) {
  Mat m(static_cast<Eigen::Index>(list.size()), static_cast<Eigen::Index>(kFeatureDim));
  for (std::size_t i = 0; i < list.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = build_feature_vector(list.docs()[i]).values.transpose();
  }
  return m;
}

std::size_t Dataset::max_list_length() const {
  std::size_t n = 0;
  for (const auto& l : lists) n = std::max(n, l.size());
  return n;
}

bool Dataset::operator==(const Dataset& o) const {
  if (lists != o.lists || split != o.split || feature_stats != o.feature_stats || metadata != o.metadata) {
    return false;
  }
  if (features.size() != o.features.size()) return false;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i] != o.features[i]) return false;
  }
  return true;
}

Mat normalize_matrix(const Mat& raw, const FeatureStats& stats) {
  if (raw.cols() != stats.mean.size() || raw.cols() != stats.stddev.size()) {
    throw ConfigError("feature stats have " + std::to_string(stats.mean.size()) + " slots, features have " +
                      std::to_string(raw.cols()));
  }
  Mat out(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    if (stats.stddev(c) == 0) {
      out.col(c).setZero();
    } else {
      out.col(c) = (raw.col(c).array() - stats.mean(c)) / stats.stddev(c);
    }
  }
  return out;
}

Dataset normalize_features(Dataset ds) {
  if (ds.lists.empty()) throw ConfigError("no lists");
  if (ds.split == Split::kTrain) {
    Vec sum = Vec::Zero(kFeatureDim);
    std::size_t n = 0;
    std::vector<Mat> raws;
    raws.reserve(ds.lists.size());
    for (const auto& l : ds.lists) {
      raws.push_back(raw_feature_matrix(l));
      sum += raws.back().colwise().sum().transpose();
      n += l.size();
    }
    FeatureStats stats;
    stats.mean = sum / static_cast<Real>(n);
    Vec sq = Vec::Zero(kFeatureDim);
    for (const auto& r : raws) {
      sq += (r.rowwise() - stats.mean.transpose()).array().square().colwise().sum().matrix().transpose();
    }
    stats.stddev = (sq / static_cast<Real>(n)).array().sqrt();
    ds.feature_stats = stats;
    ds.features.clear();
    for (const auto& r : raws) ds.features.push_back(normalize_matrix(r, stats));
    return ds;
  }
  if (!ds.feature_stats) throw ConfigError("test split needs normalization stats from the train split");
  ds.features.clear();
  for (const auto& l : ds.lists) ds.features.push_back(normalize_matrix(raw_feature_matrix(l), *ds.feature_stats));
  return ds;
}

}  // namespace attncut
