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

#include "attncut/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "attncut/errors.hpp"
#include "json.hpp"

namespace attncut {
namespace {

std::vector<std::string> fields_of(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  std::string f;
  while (is >> f) out.push_back(f);
  return out;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

WarningSink clog_warnings() {
  return [](const std::string& msg) { std::clog << "warning: " << msg << '\n'; };
}

std::vector<RunRecord> parse_run_file(std::istream& in) {
  std::vector<RunRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto f = fields_of(line);
    if (f.size() != 6) {
      throw ParseError("run record needs 6 fields, found " + std::to_string(f.size()), lineno);
    }
    if (f[1] != "Q0") throw ParseError("second run field must be 'Q0', found '" + f[1] + "'", lineno);
    RunRecord r;
    r.query_id = f[0];
    r.doc_id = f[2];
    if (!parse_number(f[3], r.rank)) throw ParseError("non-numeric rank '" + f[3] + "'", lineno);
    if (r.rank < 1) throw ParseError("rank must be >= 1, found " + f[3], lineno);
    if (!parse_number(f[4], r.score) || !std::isfinite(r.score)) {
      throw ParseError("non-numeric score '" + f[4] + "'", lineno);
    }
    r.tag = f[5];
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<QrelRecord> parse_qrels(std::istream& in, const QrelOptions& options, const WarningSink& warn) {
  std::vector<QrelRecord> out;
  std::map<std::pair<std::string, std::string>, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    const auto f = fields_of(line);
    if (f.size() != 4) {
      throw ParseError("qrels record needs 4 fields, found " + std::to_string(f.size()), lineno);
    }
    QrelRecord q;
    q.query_id = f[0];
    q.doc_id = f[2];
    if (!parse_number(f[3], q.grade)) throw ParseError("non-integer grade '" + f[3] + "'", lineno);
    if (q.grade < 0) {
      if (!options.clamp_negative) throw ParseError("negative grade " + f[3], lineno);
      q.grade = 0;
    }
    auto key = std::make_pair(q.query_id, q.doc_id);
    if (auto it = seen.find(key); it != seen.end()) {
      if (warn) {
        warn("line " + std::to_string(lineno) + ": duplicate judgment for (" + q.query_id + ", " + q.doc_id +
             "), keeping the last one");
      }
      out[it->second] = std::move(q);
    } else {
      seen.emplace(std::move(key), out.size());
      out.push_back(std::move(q));
    }
  }
  return out;
}

JsonlDocStats JsonlDocStats::parse(std::istream& in, std::string vector_space) {
  JsonlDocStats src;
  src.vector_space_ = std::move(vector_space);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DocStats s;
      s.length = j.at("length").get<long>();
      s.unique_tokens = j.at("unique_tokens").get<long>();
      if (s.length < 0 || s.unique_tokens < 0) throw ParseError("negative document statistics", lineno);
      if (j.contains("vector")) s.vector = j.at("vector").get<std::vector<Real>>();
      src.stats_[j.at("doc_id").get<std::string>()] = std::move(s);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad doc-stats record: ") + e.what(), lineno);
    }
  }
  return src;
}

const DocStats* JsonlDocStats::find(const std::string& doc_id) const {
  auto it = stats_.find(doc_id);
  return it == stats_.end() ? nullptr : &it->second;
}

Real cosine_similarity(const std::vector<Real>& a, const std::vector<Real>& b) {
  if (a.size() != b.size()) {
    throw DataError("similarity vectors differ in length: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
  }
  if (a.empty()) return 0;
  const Eigen::Map<const Vec> va(a.data(), static_cast<Eigen::Index>(a.size()));
  const Eigen::Map<const Vec> vb(b.data(), static_cast<Eigen::Index>(b.size()));
  const Real na = va.norm();
  const Real nb = vb.norm();
  if (na == 0 || nb == 0) return 0;
  return std::clamp(va.dot(vb) / (na * nb), Real(-1), Real(1));
}

Dataset assemble_dataset(const std::vector<RunRecord>& runs, const std::vector<QrelRecord>& qrels,
                         const DocStatsSource& doc_stats, const AssembleOptions& options,
                         const WarningSink& warn) {
  if (options.truncate_to < 1) throw ConfigError("truncate_to must be positive");
  std::map<std::string, std::vector<const RunRecord*>> by_query;
  for (const auto& r : runs) by_query[r.query_id].push_back(&r);
  std::map<std::string, std::map<std::string, int>> judged;
  for (const auto& q : qrels) judged[q.query_id][q.doc_id] = q.grade;

  Dataset ds;
  ds.split = Split::kTrain;
  ds.metadata["similarity_source"] = doc_stats.vector_space();
  ds.metadata["truncate_to"] = std::to_string(options.truncate_to);
  for (auto& [qid, recs] : by_query) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const RunRecord* a, const RunRecord* b) { return a->rank < b->rank; });
    if (recs.size() > options.truncate_to) recs.resize(options.truncate_to);

    const auto jq = judged.find(qid);
    if (jq == judged.end()) {
      if (warn) {
        warn("query '" + qid + "' has no judgments; " +
             (options.drop_unjudged_queries ? "dropped" : "all documents labelled non-relevant"));
      }
      if (options.drop_unjudged_queries) continue;
    }

    std::vector<const DocStats*> stats;
    for (const auto* r : recs) {
      const DocStats* s = doc_stats.find(r->doc_id);
      if (s == nullptr) throw DataError("no document statistics for '" + r->doc_id + "'");
      stats.push_back(s);
    }

    std::vector<RankedDoc> docs(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
      RankedDoc& d = docs[i];
      d.doc_id = recs[i]->doc_id;
      d.rank = static_cast<int>(i) + 1;
      d.retrieval_score = recs[i]->score;
      d.doc_length = stats[i]->length;
      d.unique_tokens = stats[i]->unique_tokens;
      if (i > 0) d.sim_prev = cosine_similarity(stats[i]->vector, stats[i - 1]->vector);
      if (i + 1 < recs.size()) d.sim_next = cosine_similarity(stats[i]->vector, stats[i + 1]->vector);
      if (jq != judged.end()) {
        auto g = jq->second.find(d.doc_id);
        d.relevance = (g != jq->second.end() && g->second > 0) ? Relevance::kRelevant : Relevance::kNonRelevant;
      }
    }
    ds.lists.emplace_back(qid, std::move(docs));
  }
  return ds;
}

void SyntheticConfig::validate() const {
  std::vector<std::string> problems;
  if (n_queries < 1) problems.push_back("n_queries must be >= 1");
  if (list_length < 2) problems.push_back("list_length must be >= 2");
  if (!(relevant_fraction > 0 && relevant_fraction < 1)) problems.push_back("relevant_fraction must be in (0,1)");
  if (!(relevant_score_std > 0)) problems.push_back("relevant_score_std must be positive");
  if (!(nonrelevant_rate > 0)) problems.push_back("nonrelevant_rate must be positive");
  if (!(similarity_gap_scale > 0)) problems.push_back("similarity_gap_scale must be positive");
  if (doc_length_min < 1 || doc_length_max < doc_length_min) problems.push_back("bad doc length range");
  if (!std::isfinite(relevant_score_mean)) problems.push_back("relevant_score_mean must be finite");
  if (!problems.empty()) {
    std::string msg = "invalid synthetic config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<Real> relevant(cfg.relevant_score_mean, cfg.relevant_score_std);
  std::exponential_distribution<Real> nonrelevant(cfg.nonrelevant_rate);
  std::uniform_int_distribution<long> length(cfg.doc_length_min, cfg.doc_length_max);
  std::uniform_real_distribution<Real> unique_ratio(0.3, 1.0);

  const std::size_t n = cfg.list_length;
  const auto n_rel = static_cast<std::size_t>(std::ceil(cfg.relevant_fraction * static_cast<Real>(n) - 1e-9));
  const int width = static_cast<int>(std::to_string(cfg.n_queries).size());

  Dataset ds;
  ds.split = Split::kTrain;
  ds.metadata["similarity_source"] = "synthetic-score-gap";
  ds.metadata["synthetic_seed"] = std::to_string(cfg.seed);
  for (std::size_t q = 0; q < cfg.n_queries; ++q) {
    std::ostringstream qid;
    qid << 'q' << std::setw(width) << std::setfill('0') << q + 1;
    struct Draw {
      Real score;
      Relevance label;
      std::size_t index;
    };
    std::vector<Draw> draws(n);
    for (std::size_t i = 0; i < n; ++i) {
      const bool rel = i < n_rel;
      draws[i] = {rel ? relevant(rng) : nonrelevant(rng), rel ? Relevance::kRelevant : Relevance::kNonRelevant, i};
    }
    std::stable_sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) { return a.score > b.score; });
    std::vector<RankedDoc> docs(n);
    for (std::size_t i = 0; i < n; ++i) {
      RankedDoc& d = docs[i];
      d.doc_id = qid.str() + "-d" + std::to_string(draws[i].index + 1);
      d.rank = static_cast<int>(i) + 1;
      d.retrieval_score = draws[i].score;
      d.relevance = draws[i].label;
      d.doc_length = length(rng);
      d.unique_tokens = std::max(1L, std::lround(unique_ratio(rng) * static_cast<Real>(d.doc_length)));
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Real gap = std::abs(docs[i].retrieval_score - docs[i + 1].retrieval_score);
      const Real sim = 2 * std::exp(-gap / cfg.similarity_gap_scale) - 1;
      docs[i].sim_next = sim;
      docs[i + 1].sim_prev = sim;
    }
    ds.lists.emplace_back(qid.str(), std::move(docs));
  }
  return ds;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, Real train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw ConfigError("train_fraction must be in (0,1)");
  const std::size_t n = ds.lists.size();
  if (n < 2) throw ConfigError("need at least 2 queries to split, found " + std::to_string(n));
  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<Real>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> in_train(n, false);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = true;

  Dataset train;
  Dataset test;
  train.split = Split::kTrain;
  test.split = Split::kTest;
  train.metadata = test.metadata = ds.metadata;
  for (auto* part : {&train, &test}) {
    part->metadata["train_fraction"] = std::to_string(train_fraction);
    part->metadata["split_seed"] = std::to_string(seed);
  }
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? train : test).lists.push_back(ds.lists[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace attncut
