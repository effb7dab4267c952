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
#include <random>
#include <sstream>

#include "attncut/errors.hpp"
#include "attncut/ingestion.hpp"
#include "attncut/metrics.hpp"
#include "attncut/stats.hpp"
#include "attncut/truncation.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace attncut;
using attncut::testing::make_list;
using attncut::testing::random_matrix;

namespace {

// N x B rows with the given argmax bins.
Mat rows_for(const std::vector<int>& bins, int b = 5) {
  Mat m = Mat::Constant(static_cast<Eigen::Index>(bins.size()), b, 0.1);
  for (std::size_t i = 0; i < bins.size(); ++i) m(static_cast<Eigen::Index>(i), bins[i]) = 0.6;
  return m;
}

ConstraintConfig sigma(Real s, Fallback f = Fallback::kFullList) { return ConstraintConfig{s, f}; }

}  // namespace

TEST_CASE("plain truncation takes the argmax") {
  const auto d = truncate_distribution("q", std::vector<Real>{0.1, 0.7, 0.2}, MetricName::kF1);
  CHECK(d.cut_position == 2);
  REQUIRE(d.predicted_distribution);
  CHECK(d.predicted_distribution->size() == 3);
  CHECK(truncate_distribution("q", std::vector<Real>(4, 0.25), MetricName::kF1).cut_position == 1);
  CHECK(truncate_distribution("q", std::vector<Real>{0, 0, 1}, MetricName::kF1).cut_position == 3);
  CHECK_THROWS_AS(truncate_distribution("q", std::vector<Real>{}, MetricName::kF1), DataError);
}

TEST_CASE("constrained cut examples") {
  const auto edges = equal_width_bins(5);
  // First position predicted in a bin reaching 0.5 is 2.
  const Mat rows = rows_for({0, 3, 4});
  auto c = constrained_cut(std::vector<Real>{0.1, 0.5, 0.4}, rows, edges, sigma(0.5));
  CHECK(c.first_feasible == 2u);
  CHECK(c.cut == 2);
  CHECK(!c.fallback_used);
  c = constrained_cut(std::vector<Real>{0.6, 0.3, 0.1}, rows, edges, sigma(0.5));
  CHECK(c.cut == 2);
  c = constrained_cut(std::vector<Real>{0.6, 0.1, 0.3}, rows, edges, sigma(0.5));
  CHECK(c.cut == 3);
  // Ties in the retry walk go to the smaller position.
  c = constrained_cut(std::vector<Real>{0.5, 0.25, 0.25}, rows, edges, sigma(0.5));
  CHECK(c.cut == 2);
}

TEST_CASE("constrained cut fallback") {
  const auto edges = equal_width_bins(5);
  const Mat rows = rows_for({0, 1, 1});
  auto c = constrained_cut(std::vector<Real>{0.2, 0.5, 0.3}, rows, edges, sigma(0.7));
  CHECK(c.fallback_used);
  CHECK(!c.first_feasible);
  CHECK(c.cut == 3);
  c = constrained_cut(std::vector<Real>{0.2, 0.5, 0.3}, rows, edges, sigma(0.7, Fallback::kUnconstrainedArgmax));
  CHECK(c.fallback_used);
  CHECK(c.cut == 2);
  CHECK_THROWS_AS(constrained_cut(std::vector<Real>{1.0}, rows_for({0}), edges, sigma(1.5)), ConfigError);
  CHECK_THROWS_AS(constrained_cut(std::vector<Real>{0.5, 0.5}, rows, edges, sigma(0.2)), ShapeError);
  CHECK(parse_fallback("full_list") == Fallback::kFullList);
  CHECK(parse_fallback("unconstrained_argmax") == Fallback::kUnconstrainedArgmax);
  CHECK_THROWS_AS(parse_fallback("none"), ConfigError);
}

TEST_CASE("constrained cut properties on random inputs") {
  const auto edges = equal_width_bins(5);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng() % 30);
    Mat p = random_matrix(n, 1, rng, 0, 1);
    p /= p.sum();
    // Some ties in p.
    if (n > 2 && rng() % 3 == 0) p(1, 0) = p(0, 0);
    const Mat rows = random_matrix(n, 5, rng, 0, 1);
    const std::vector<Real> pv(p.data(), p.data() + n);
    const auto plain = argmax_position(pv);
    const auto zero = constrained_cut(pv, rows, edges, sigma(0));
    CHECK(zero.cut == plain);
    CHECK(!zero.fallback_used);
    const auto bins = predicted_bins(rows);
    for (Real s : {0.3, 0.5, 0.7, 1.0}) {
      const auto c = constrained_cut(pv, rows, edges, sigma(s));
      CHECK(c.cut >= 1);
      CHECK(c.cut <= static_cast<std::size_t>(n));
      if (c.fallback_used) continue;
      // Some position at or before the cut is predicted to reach sigma.
      Real best_edge = 0;
      for (std::size_t k = 0; k < c.cut; ++k) best_edge = std::max(best_edge, edges[static_cast<std::size_t>(bins[k])]);
      CHECK(best_edge >= s);
      // Nothing with higher probability was feasible.
      for (std::size_t k = 0; k < pv.size(); ++k) {
        if (pv[k] > pv[c.cut - 1]) CHECK(k + 1 < *c.first_feasible);
      }
    }
  }
}

TEST_CASE("evaluate") {
  Dataset ds;
  ds.lists = {make_list("a", {1, -1, 1, -1}), make_list("b", {-1, 1, 1, -1, -1}), make_list("c", {-1, -1})};
  std::vector<TruncationDecision> oracle;
  for (const auto& l : ds.lists) oracle.push_back(oracle_cut(l, MetricName::kF1));
  const auto s = evaluate(oracle, ds, MetricName::kF1);
  Real mean = 0;
  for (const auto& d : oracle) mean += *d.achieved_metric;
  CHECK(s.mean_metric == doctest::Approx(mean / 3).epsilon(1e-12));
  CHECK(std::abs(s.mean_metric - std::accumulate(s.per_query_metric.begin(), s.per_query_metric.end(), 0.0) / 3) <=
        1e-12);
  CHECK(s.meeting_sigma == 3);

  std::vector<TruncationDecision> fixed;
  for (const auto& l : ds.lists) fixed.push_back(fixed_k_cut(l, 5));
  const auto f = evaluate(fixed, ds, MetricName::kDcg, 0.9);
  CHECK(f.per_query_metric[0] == doctest::Approx(1 - 1 / std::log2(3.0) + 1 / std::log2(4.0) - 1 / std::log2(5.0)));
  CHECK(f.per_query_metric[2] == doctest::Approx(-1 - 1 / std::log2(3.0)));
  CHECK(f.meeting_sigma == 2);  // list c has recall 0

  auto missing = oracle;
  missing.pop_back();
  CHECK_THROWS_AS(evaluate(missing, ds, MetricName::kF1), DataError);
  auto dup = oracle;
  dup[2].query_id = "a";
  CHECK_THROWS_AS(evaluate(dup, ds, MetricName::kF1), DataError);
  auto bad = oracle;
  bad[2].cut_position = 3;
  CHECK_THROWS_AS(evaluate(bad, ds, MetricName::kF1), DataError);
}

TEST_CASE("decisions JSONL round trip and unlabeled lists") {
  std::vector<TruncationDecision> ds(2);
  ds[0].query_id = "q1";
  ds[0].cut_position = 4;
  ds[0].achieved_metric = 0.5;
  ds[0].achieved_recall = 0.25;
  ds[1].query_id = "q2";
  ds[1].cut_position = 1;
  ds[1].metric_name = MetricName::kDcg;
  ds[1].constrained = true;
  ds[1].fallback_used = true;
  std::stringstream buf;
  write_decisions(buf, ds);
  const std::string text = buf.str();
  CHECK(text.find(R"({"query_id":"q1","cut_position":4,"metric_name":"f1","achieved_metric":0.5,"achieved_recall":0.25,"constrained":false,"fallback_used":false})") == 0);
  CHECK(text.find("achieved", text.find("q2")) == std::string::npos);
  const auto back = read_decisions(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].cut_position == 4);
  CHECK(*back[0].achieved_recall == 0.25);
  CHECK(back[1].metric_name == MetricName::kDcg);
  CHECK(back[1].fallback_used);
  CHECK(!back[1].achieved_metric);

  std::istringstream bad("{\"query_id\":\"q\"}\n");
  CHECK_THROWS_AS(read_decisions(bad), ParseError);

  TruncationDecision d;
  d.cut_position = 2;
  fill_achieved(d, make_list("u", {-1, -1, -1}, false));
  CHECK(!d.achieved_metric);
  fill_achieved(d, make_list("l", {1, 1, -1}));
  CHECK(*d.achieved_metric == 1.0);
  CHECK(*d.achieved_recall == 1.0);
}

TEST_CASE("wilcoxon signed-rank") {
  const std::vector<Real> a{0.1, 0.5, 0.3, 0.9};
  const auto same = wilcoxon_signed_rank(a, a);
  CHECK(same.p_value == 1.0);
  CHECK(same.n == 0);
  CHECK_THROWS(wilcoxon_signed_rank(a, std::vector<Real>{1.0}));
}

TEST_CASE("wilcoxon exact p-values match sign enumeration") {
  std::mt19937_64 rng(2);
  std::normal_distribution<Real> nd(0.2, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng() % 12;
    std::vector<Real> a(n), b(n, 0.0);
    for (auto& v : a) v = nd(rng);
    const auto res = wilcoxon_signed_rank(a, b);
    REQUIRE(res.exact);
    // Ranks of |a| are 1..n (continuous draws); enumerate all sign patterns.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return std::abs(a[i]) < std::abs(a[j]); });
    Real w = 0;
    for (std::size_t r = 0; r < n; ++r) w += a[order[r]] > 0 ? static_cast<Real>(r + 1) : 0.0;
    CHECK(res.statistic == w);
    std::size_t le = 0, ge = 0;
    const std::size_t total = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < total; ++mask) {
      Real s = 0;
      for (std::size_t r = 0; r < n; ++r) s += (mask >> r & 1U) ? static_cast<Real>(r + 1) : 0.0;
      le += s <= w ? 1 : 0;
      ge += s >= w ? 1 : 0;
    }
    const Real expected = std::min(1.0, 2.0 * static_cast<Real>(std::min(le, ge)) / static_cast<Real>(total));
    CHECK(res.p_value == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon normal approximation") {
  // 30 untied pairs: two-sided normal approximation, no continuity correction.
  std::vector<Real> a, b;
  for (int i = 1; i <= 30; ++i) {
    a.push_back(static_cast<Real>(i));
    b.push_back(static_cast<Real>(i) + ((i % 3 == 0) ? 0.5 * i : -0.1 * i));
  }
  const auto res = wilcoxon_signed_rank(a, b);
  CHECK(!res.exact);
  // Independent recomputation of the z statistic.
  std::vector<std::pair<Real, int>> mags;
  for (int i = 0; i < 30; ++i) mags.push_back({std::abs(a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]), a[static_cast<std::size_t>(i)] > b[static_cast<std::size_t>(i)] ? 1 : -1});
  std::sort(mags.begin(), mags.end());
  Real w = 0;
  for (std::size_t r = 0; r < mags.size(); ++r) w += mags[r].second > 0 ? static_cast<Real>(r + 1) : 0.0;
  const Real mean = 30.0 * 31 / 4;
  const Real sd = std::sqrt(30.0 * 31 * 61 / 24);
  const Real p = std::erfc(std::abs(w - mean) / sd / std::sqrt(2.0));
  CHECK(res.statistic == w);
  CHECK(res.p_value == doctest::Approx(p).epsilon(1e-12));
}

TEST_CASE("wilcoxon with ties uses averaged ranks") {
  const std::vector<Real> a{1, 1, 1, 1, 2, 2, 3, 0};
  const std::vector<Real> b{0, 0, 2, 0, 1, 3, 2, 0};
  // diffs: 1, 1, -1, 1, 1, -1, 1, (0 dropped); all magnitudes tie at rank 4.
  const auto res = wilcoxon_signed_rank(a, b);
  CHECK(res.n == 7);
  CHECK(!res.exact);
  CHECK(res.statistic == doctest::Approx(5 * 4.0));
  const Real var = 7.0 * 8 * 15 / 24 - (343.0 - 7) / 48;
  CHECK(res.p_value == doctest::Approx(std::erfc(std::abs(20 - 14.0) / std::sqrt(var) / std::sqrt(2.0))));
}
