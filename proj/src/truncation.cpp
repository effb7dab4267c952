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

#include "attncut/truncation.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <string>

#include "attncut/errors.hpp"
#include "attncut/metrics.hpp"
#include "json.hpp"

namespace attncut {

std::string_view to_string(Fallback f) {
  return f == Fallback::kFullList ? "full_list" : "unconstrained_argmax";
}

Fallback parse_fallback(std::string_view s) {
  if (s == "full_list") return Fallback::kFullList;
  if (s == "unconstrained_argmax") return Fallback::kUnconstrainedArgmax;
  throw ConfigError("unknown fallback '" + std::string(s) + "' (expected full_list or unconstrained_argmax)");
}

void ConstraintConfig::validate() const {
  if (!(sigma >= 0 && sigma <= 1)) throw ConfigError("sigma must lie in [0,1], got " + std::to_string(sigma));
}

TruncationDecision truncate_distribution(const std::string& query_id, std::span<const Real> p, MetricName metric) {
  if (p.empty()) throw DataError("cannot truncate an empty list '" + query_id + "'");
  TruncationDecision d;
  d.query_id = query_id;
  d.metric_name = metric;
  d.cut_position = argmax_position(p);
  d.predicted_distribution = std::vector<Real>(p.begin(), p.end());
  return d;
}

TruncationDecision truncate(const AttnCutModel& model, const RankedList& list, const Mat& features) {
  if (list.size() == 0) throw DataError("cannot truncate an empty list '" + list.query_id() + "'");
  const auto p = model.probabilities(features);
  return truncate_distribution(list.query_id(), p, model.metadata.metric);
}

std::vector<int> predicted_bins(const Mat& recall_rows) {
  std::vector<int> bins(static_cast<std::size_t>(recall_rows.rows()));
  for (Eigen::Index r = 0; r < recall_rows.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < recall_rows.cols(); ++c) {
      if (recall_rows(r, c) > recall_rows(r, best)) best = c;
    }
    bins[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return bins;
}

ConstrainedCut constrained_cut(std::span<const Real> p, const Mat& recall_rows, const std::vector<Real>& edges,
                               const ConstraintConfig& cfg) {
  cfg.validate();
  if (p.empty()) throw DataError("cannot truncate an empty list");
  if (static_cast<std::size_t>(recall_rows.rows()) != p.size()) {
    throw ShapeError("recall rows " + std::to_string(recall_rows.rows()) + " do not match list length " +
                     std::to_string(p.size()));
  }
  if (edges.size() != static_cast<std::size_t>(recall_rows.cols()) + 1) {
    throw ShapeError("bin edges do not match the recall model output");
  }
  ConstrainedCut out;
  const auto bins = predicted_bins(recall_rows);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    if (edges[static_cast<std::size_t>(bins[k])] >= cfg.sigma) {
      out.first_feasible = k + 1;
      break;
    }
  }
  const std::size_t m = argmax_position(p);
  if (!out.first_feasible) {
    out.fallback_used = true;
    out.cut = cfg.fallback == Fallback::kFullList ? p.size() : m;
    return out;
  }
  const std::size_t j = *out.first_feasible;
  if (m >= j) {
    out.cut = m;
    return out;
  }
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  for (std::size_t idx : order) {
    if (idx + 1 >= j) {
      out.cut = idx + 1;
      return out;
    }
  }
  // j <= N, so some position always qualifies.
  out.cut = p.size();
  return out;
}

TruncationDecision constrained_truncate(const AttnCutModel& metric_model, const RecallConstraintModel& recall_model,
                                        const RankedList& list, const Mat& features, const ConstraintConfig& cfg) {
  if (list.size() == 0) throw DataError("cannot truncate an empty list '" + list.query_id() + "'");
  const auto p = metric_model.probabilities(features);
  const Mat rows = recall_model.probabilities(features);
  const ConstrainedCut c = constrained_cut(p, rows, recall_model.bin_edges(), cfg);
  TruncationDecision d = truncate_distribution(list.query_id(), p, metric_model.metadata.metric);
  d.cut_position = c.cut;
  d.constrained = true;
  d.fallback_used = c.fallback_used;
  return d;
}

void fill_achieved(TruncationDecision& d, const RankedList& list) {
  if (!list.labeled()) {
    d.achieved_metric.reset();
    d.achieved_recall.reset();
    return;
  }
  d.achieved_metric = metric_at(list, d.cut_position, d.metric_name);
  d.achieved_recall = recall_at(list, d.cut_position);
}

EvaluationSummary evaluate(std::span<const TruncationDecision> decisions, const Dataset& test, MetricName metric,
                           std::optional<Real> sigma) {
  if (decisions.size() != test.lists.size()) {
    throw DataError("got " + std::to_string(decisions.size()) + " decisions for " + std::to_string(test.lists.size()) +
                    " lists");
  }
  std::map<std::string, const TruncationDecision*> by_query;
  for (const auto& d : decisions) {
    if (!by_query.emplace(d.query_id, &d).second) throw DataError("duplicate decision for query '" + d.query_id + "'");
  }
  EvaluationSummary s;
  s.metric = metric;
  for (const auto& list : test.lists) {
    const auto it = by_query.find(list.query_id());
    if (it == by_query.end()) throw DataError("no decision for query '" + list.query_id() + "'");
    const std::size_t k = it->second->cut_position;
    if (k < 1 || k > list.size()) {
      throw DataError("cut " + std::to_string(k) + " out of range for query '" + list.query_id() + "'");
    }
    const Real value = metric_at(list, k, metric);
    const Real recall = recall_at(list, k);
    s.query_ids.push_back(list.query_id());
    s.per_query_metric.push_back(value);
    s.per_query_recall.push_back(recall);
    s.cut_positions.push_back(k);
    if (!sigma || recall >= *sigma) ++s.meeting_sigma;
  }
  if (!s.per_query_metric.empty()) {
    const auto n = static_cast<Real>(s.per_query_metric.size());
    s.mean_metric = std::accumulate(s.per_query_metric.begin(), s.per_query_metric.end(), 0.0) / n;
    s.mean_recall = std::accumulate(s.per_query_recall.begin(), s.per_query_recall.end(), 0.0) / n;
  }
  return s;
}

void write_decisions(std::ostream& out, std::span<const TruncationDecision> decisions) {
  for (const auto& d : decisions) {
    nlohmann::ordered_json j;
    j["query_id"] = d.query_id;
    j["cut_position"] = d.cut_position;
    j["metric_name"] = std::string(to_string(d.metric_name));
    if (d.achieved_metric) j["achieved_metric"] = *d.achieved_metric;
    if (d.achieved_recall) j["achieved_recall"] = *d.achieved_recall;
    j["constrained"] = d.constrained;
    j["fallback_used"] = d.fallback_used;
    out << j.dump() << '\n';
  }
}

std::vector<TruncationDecision> read_decisions(std::istream& in) {
  std::vector<TruncationDecision> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TruncationDecision d;
      d.query_id = j.at("query_id").get<std::string>();
      d.cut_position = j.at("cut_position").get<std::size_t>();
      d.metric_name = parse_metric_name(j.at("metric_name").get<std::string>());
      if (j.contains("achieved_metric")) d.achieved_metric = j["achieved_metric"].get<Real>();
      if (j.contains("achieved_recall")) d.achieved_recall = j["achieved_recall"].get<Real>();
      d.constrained = j.value("constrained", false);
      d.fallback_used = j.value("fallback_used", false);
      if (d.cut_position < 1) throw DataError("cut_position must be >= 1");
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("decisions: ") + e.what(), line_no);
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("decisions: ") + e.what(), line_no);
    }
  }
  return out;
}

}  // namespace attncut
