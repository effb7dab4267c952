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

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "attncut/data_model.hpp"
#include "attncut/dataset_io.hpp"
#include "attncut/errors.hpp"
#include "attncut/ingestion.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace attncut;
using attncut::testing::make_list;

namespace {

RankedDoc doc(const std::string& id, int rank, Real sp = 0, Real sn = 0) {
  RankedDoc d;
  d.doc_id = id;
  d.rank = rank;
  d.retrieval_score = 1.0;
  d.sim_prev = sp;
  d.sim_next = sn;
  return d;
}

}  // namespace

TEST_CASE("feature vector follows the fixed layout") {
  RankedDoc d;
  d.retrieval_score = 12.3;
  d.doc_length = 100;
  d.unique_tokens = 60;
  d.sim_prev = 0.0;
  d.sim_next = 0.5;
  const auto fv = build_feature_vector(d);
  REQUIRE(fv.values.size() == 5);
  CHECK(fv.values[0] == 12.3);
  CHECK(fv.values[1] == 100);
  CHECK(fv.values[2] == 60);
  CHECK(fv.values[3] == 0.0);
  CHECK(fv.values[4] == 0.5);
  CHECK(fv.layout.size() == fv.values.size());
  d.doc_length = 0;
  d.unique_tokens = 0;
  CHECK(build_feature_vector(d).values[1] == 0);
}

TEST_CASE("ranked list validation") {
  const auto list = make_list("q", {1, -1, 1});
  CHECK(list.n_relevant() == 2);
  CHECK(list.docs().front().sim_prev == 0.0);
  CHECK_THROWS_AS(RankedList("e", {}), DataError);
  CHECK_THROWS_AS(RankedList("g", {doc("a", 1), doc("b", 3)}), DataError);
  CHECK_THROWS_AS(RankedList("d", {doc("a", 1), doc("b", 1)}), DataError);
  CHECK_THROWS_AS(RankedList("s", {doc("a", 1, 0.2, 0.1), doc("b", 2, 0.1, 0)}), DataError);
}

TEST_CASE("normalize features") {
  Dataset ds;
  std::vector<RankedDoc> docs{doc("a", 1), doc("b", 2)};
  docs[0].retrieval_score = 1;
  docs[1].retrieval_score = 3;
  docs[0].doc_length = docs[1].doc_length = 5;
  ds.lists.emplace_back("q", docs);
  const Dataset n = normalize_features(ds);
  REQUIRE(n.feature_stats);
  CHECK(n.feature_stats->mean[0] == 2.0);
  CHECK(n.feature_stats->stddev[0] == 1.0);
  CHECK(n.features[0](0, 0) == -1.0);
  CHECK(n.features[0](1, 0) == 1.0);
  CHECK(n.features[0](0, 1) == 0.0);
  CHECK(n.features[0](1, 1) == 0.0);

  Dataset test = ds;
  test.split = Split::kTest;
  CHECK_THROWS_AS(normalize_features(test), ConfigError);
  test.feature_stats = n.feature_stats;
  CHECK(normalize_features(test).features[0] == n.features[0]);

  try {
    normalize_features(Dataset{});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == "no lists");
  }
}

TEST_CASE("run file parsing") {
  std::istringstream in("301 Q0 FBIS3-10082 1 12.34 bm25\n\n301 Q0 d2 2 11.0 bm25\n");
  const auto runs = parse_run_file(in);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0] == RunRecord{"301", "FBIS3-10082", 1, 12.34, "bm25"});
  std::istringstream bad("301 Q0 d0 1 1.0 t\n301 Q0 d1 x 1.0 t\n");
  try {
    parse_run_file(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  std::istringstream short_line("301 Q0 d1 1 1.0\n");
  CHECK_THROWS_AS(parse_run_file(short_line), ParseError);
  std::istringstream bad_score("301 Q0 d1 1 abc t\n");
  CHECK_THROWS_AS(parse_run_file(bad_score), ParseError);
}

TEST_CASE("qrels parsing") {
  std::istringstream in("301 0 FBIS3-10082 1\n301 0 d2 2\n");
  const auto q = parse_qrels(in);
  REQUIRE(q.size() == 2);
  CHECK(q[0] == QrelRecord{"301", "FBIS3-10082", 1});
  CHECK(q[1].grade == 2);

  std::istringstream neg("301 0 d1 -1\n");
  CHECK_THROWS_AS(parse_qrels(neg), ParseError);
  std::istringstream neg2("301 0 d1 -1\n");
  QrelOptions clamp;
  clamp.clamp_negative = true;
  CHECK(parse_qrels(neg2, clamp)[0].grade == 0);

  std::istringstream bad("301 0 d1 1.5\n");
  CHECK_THROWS_AS(parse_qrels(bad), ParseError);

  std::vector<std::string> warnings;
  std::istringstream dup("301 0 d1 1\n301 0 d1 0\n");
  const auto d = parse_qrels(dup, {}, [&](const std::string& m) { warnings.push_back(m); });
  REQUIRE(d.size() == 1);
  CHECK(d[0].grade == 0);
  CHECK(warnings.size() == 1);
}

TEST_CASE("dataset assembly") {
  std::istringstream run_in(
      "q1 Q0 d3 3 1.0 t\n"
      "q1 Q0 d1 1 3.0 t\n"
      "q1 Q0 d2 2 2.0 t\n"
      "q2 Q0 d1 1 5.0 t\n");
  std::istringstream qrel_in("q1 0 d2 1\nq1 0 d3 0\n");
  std::istringstream stats_in(
      R"({"doc_id":"d1","length":10,"unique_tokens":5,"vector":[1,0]})"
      "\n"
      R"({"doc_id":"d2","length":20,"unique_tokens":8,"vector":[1,1]})"
      "\n"
      R"({"doc_id":"d3","length":30,"unique_tokens":9,"vector":[0,1]})"
      "\n");
  const auto runs = parse_run_file(run_in);
  const auto qrels = parse_qrels(qrel_in);
  const auto stats = JsonlDocStats::parse(stats_in, "tfidf");
  std::vector<std::string> warnings;
  AssembleOptions opt;
  const Dataset ds = assemble_dataset(runs, qrels, stats, opt, [&](const std::string& m) { warnings.push_back(m); });
  REQUIRE(ds.lists.size() == 2);
  const auto& q1 = ds.lists[0];
  CHECK(q1.query_id() == "q1");
  CHECK(q1.size() == 3);
  CHECK(q1.n_relevant() == 1);
  CHECK(q1.docs()[0].doc_id == "d1");
  CHECK(q1.docs()[2].doc_id == "d3");
  CHECK(q1.docs()[0].sim_prev == 0.0);
  CHECK(q1.docs()[0].sim_next == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(q1.docs()[1].sim_prev == q1.docs()[0].sim_next);
  CHECK(q1.docs()[2].sim_next == 0.0);
  CHECK(ds.lists[1].n_relevant() == 0);
  CHECK(warnings.size() == 1);
  CHECK(ds.metadata.at("similarity_source") == "tfidf");

  opt.truncate_to = 2;
  CHECK(assemble_dataset(runs, qrels, stats, opt, [](const std::string&) {}).lists[0].size() == 2);
  opt.truncate_to = 300;
  opt.drop_unjudged_queries = true;
  CHECK(assemble_dataset(runs, qrels, stats, opt, [](const std::string&) {}).lists.size() == 1);

  JsonlDocStats partial;
  partial.insert("d1", DocStats{1, 1, {1.0}});
  try {
    assemble_dataset(runs, qrels, partial, AssembleOptions{}, [](const std::string&) {});
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("d2") != std::string::npos);
  }
}

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity({1, 0}, {0, 1}) == 0.0);
  CHECK(cosine_similarity({1, 2}, {2, 4}) == doctest::Approx(1.0));
  CHECK(cosine_similarity({0, 0}, {1, 1}) == 0.0);
}

TEST_CASE("synthetic generation") {
  SyntheticConfig cfg;
  cfg.n_queries = 12;
  cfg.list_length = 100;
  const Dataset a = generate_synthetic(cfg);
  const Dataset b = generate_synthetic(cfg);
  CHECK(a == b);
  std::ostringstream sa, sb;
  write_dataset(sa, a);
  write_dataset(sb, b);
  CHECK(sa.str() == sb.str());
  CHECK(a.lists.size() == 12);
  for (const auto& l : a.lists) {
    CHECK(l.size() == 100);
    CHECK(l.n_relevant() == 20);
    for (std::size_t i = 1; i < l.size(); ++i) {
      CHECK(l.docs()[i - 1].retrieval_score >= l.docs()[i].retrieval_score);
      CHECK(l.docs()[i].sim_prev >= -1.0);
      CHECK(l.docs()[i].sim_prev <= 1.0);
    }
  }
  cfg.seed = 43;
  CHECK(!(generate_synthetic(cfg) == a));

  SyntheticConfig bad;
  bad.list_length = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = SyntheticConfig{};
  bad.nonrelevant_rate = 0;
  CHECK_THROWS_AS(generate_synthetic(bad), ConfigError);
}

TEST_CASE("synthetic relevant scores match the configured mean") {
  SyntheticConfig cfg;
  cfg.n_queries = 500;
  cfg.list_length = 100;
  const Dataset ds = generate_synthetic(cfg);
  Real sum = 0;
  std::size_t n = 0;
  for (const auto& l : ds.lists) {
    for (const auto& d : l.docs()) {
      if (is_relevant(d.relevance)) {
        sum += d.retrieval_score;
        ++n;
      }
    }
  }
  REQUIRE(n >= 10000);
  const Real se = cfg.relevant_score_std / std::sqrt(static_cast<Real>(n));
  CHECK(std::abs(sum / static_cast<Real>(n) - cfg.relevant_score_mean) <= 3 * se);
}

TEST_CASE("separable synthetic data has oracle f1 near 1") {
  SyntheticConfig cfg;
  cfg.n_queries = 20;
  cfg.relevant_score_mean = 30;
  const Dataset ds = generate_synthetic(cfg);
  for (const auto& l : ds.lists) {
    const auto labels = l.labels();
    std::size_t rel = 0;
    for (std::size_t k = 0; k < 20; ++k) rel += is_relevant(labels[k]) ? 1 : 0;
    CHECK(rel == 20);
  }
}

TEST_CASE("query split") {
  SyntheticConfig cfg;
  cfg.n_queries = 10;
  cfg.list_length = 5;
  const Dataset ds = generate_synthetic(cfg);
  const auto [train, test] = split_dataset(ds, 0.8, 7);
  CHECK(train.lists.size() == 8);
  CHECK(test.lists.size() == 2);
  CHECK(train.split == Split::kTrain);
  CHECK(test.split == Split::kTest);
  std::set<std::string> ids;
  for (const auto& l : train.lists) ids.insert(l.query_id());
  for (const auto& l : test.lists) CHECK(ids.count(l.query_id()) == 0);
  const auto again = split_dataset(ds, 0.8, 7);
  CHECK(again.first == train);
  CHECK(again.second == test);
  CHECK(train.metadata.at("train_fraction").rfind("0.8", 0) == 0);

  Dataset one;
  one.lists = {make_list("a", {1})};
  CHECK_THROWS_AS(split_dataset(one, 0.8, 1), ConfigError);
}

TEST_CASE("dataset JSONL round trip") {
  SyntheticConfig cfg;
  cfg.n_queries = 6;
  cfg.list_length = 17;
  Dataset ds = normalize_features(generate_synthetic(cfg));
  ds.lists.push_back(make_list("unlabeled", {-1, -1, -1}, false));
  std::stringstream buf;
  write_dataset(buf, ds);
  Dataset back = read_dataset(buf);
  CHECK(back.features.empty());
  back.features = ds.features;
  CHECK(back == ds);
  CHECK(!back.lists.back().labeled());
  std::ostringstream again;
  write_dataset(again, back);
  CHECK(again.str() == buf.str());
}

TEST_CASE("malformed dataset files raise ParseError") {
  const char* cases[] = {
      "",
      "not json\n",
      R"({"format":"other","version":1})" "\n",
      R"({"format":"attncut-dataset","version":99,"split":"train","layout":[],"metadata":{},"feature_stats":null})" "\n",
      R"({"format":"attncut-dataset","version":1,"split":"train","layout":["a"],"metadata":{},"feature_stats":null})" "\n",
  };
  for (const char* c : cases) {
    std::istringstream in(c);
    CHECK_THROWS_AS(read_dataset(in), ParseError);
  }
  SyntheticConfig cfg;
  cfg.n_queries = 2;
  cfg.list_length = 3;
  std::stringstream good;
  write_dataset(good, generate_synthetic(cfg));
  const std::string header = good.str().substr(0, good.str().find('\n') + 1);
  const char* bodies[] = {
      R"({"query_id":"q","docs":[]})",
      R"({"query_id":"q","docs":[{"doc_id":"a","rank":2,"score":1,"length":1,"unique_tokens":1,"sim_prev":0,"sim_next":0,"relevance":1}]})",
      R"({"query_id":"q","docs":[{"doc_id":"a","rank":1,"score":1,"length":1,"unique_tokens":1,"sim_prev":0,"sim_next":0,"relevance":3}]})",
      R"({"query_id":"q","docs":[{"doc_id":"a","rank":1}]})",
      R"({"query_id":"q")",
  };
  for (const char* body : bodies) {
    std::istringstream in(header + body + "\n");
    try {
      read_dataset(in);
      FAIL("expected ParseError for " << body);
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
}
