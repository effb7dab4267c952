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
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "attncut/errors.hpp"
#include "attncut/ingestion.hpp"
#include "attncut/layers.hpp"
#include "attncut/metrics.hpp"
#include "attncut/model.hpp"
#include "attncut/tensor_archive.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace attncut;
using attncut::testing::check_gradients;
using attncut::testing::make_list;
using attncut::testing::probe;
using attncut::testing::random_matrix;

namespace {

ModelConfig tiny_config(int out_dim = 1) {
  ModelConfig c;
  c.hidden_size = 3;
  c.model_dim = 6;
  c.heads = 2;
  c.mlp_hidden = 4;
  c.out_dim = out_dim;
  c.init_seed = 5;
  return c;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("attncut_test_" + name);
}

}  // namespace

TEST_CASE("lstm cell with zero parameters") {
  ParameterSet set;
  Rng rng(1);
  auto p = LstmCellParams::create(set, "cell", 2, 3, rng);
  for (std::size_t i = 0; i < set.size(); ++i) set[i].value.setZero();
  Tape tape;
  const Tensor x = tape.constant(Mat::Ones(1, 2));
  const LstmState zero{tape.constant(Mat::Zero(1, 3)), tape.constant(Mat::Zero(1, 3))};
  const LstmState s = lstm_cell(x, zero, p);
  CHECK(s.h.value().cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.c.value().cwiseAbs().maxCoeff() == 0.0);
  Mat c(1, 3);
  c << 1.0, -2.0, 0.5;
  const LstmState s2 = lstm_cell(x, {tape.constant(Mat::Zero(1, 3)), tape.constant(c)}, p);
  CHECK((s2.c.value() - 0.5 * c).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("lstm initialization") {
  ParameterSet set;
  Rng rng(1);
  auto p = LstmCellParams::create(set, "cell", 4, 3, rng);
  CHECK(p.input_weights->value.rows() == 4);
  CHECK(p.input_weights->value.cols() == 12);
  CHECK(p.recurrent_weights->value.rows() == 3);
  const Mat& b = p.bias->value;
  for (int j = 0; j < 12; ++j) CHECK(b(0, j) == ((j >= 3 && j < 6) ? 1.0 : 0.0));
  CHECK(p.input_weights->value.cwiseAbs().maxCoeff() <= 0.5);
}

TEST_CASE("lstm cell gradient check") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 20; ++i) {
    ParameterSet set;
    Rng init(static_cast<std::uint64_t>(i));
    auto p = LstmCellParams::create(set, "cell", 3, 4, init);
    const Mat w = random_matrix(1, 8, rng);
    const auto res = check_gradients(
        {random_matrix(1, 3, rng), random_matrix(1, 4, rng), random_matrix(1, 4, rng)},
        [&](Tape&, std::span<const Tensor> x) {
          const LstmState s = lstm_cell(x[0], {x[1], x[2]}, p);
          return probe(ad::concat_cols<Real>({s.h, s.c}), w);
        },
        &set);
    INFO(res.worst << " " << res.max_rel_error);
    CHECK(res.ok());
  }
}

TEST_CASE("bilstm output width and degenerate length") {
  ParameterSet set;
  Rng rng(3);
  auto p = BiLstmParams::create(set, "enc", 5, 128, 2, rng);
  Tape tape;
  const Tensor out = bilstm_encode(tape.constant(Mat::Ones(4, 5)), p);
  CHECK(out.cols() == 256);
  CHECK(out.rows() == 4);
  const Tensor one = bilstm_encode(tape.constant(Mat::Ones(1, 5)), p);
  CHECK(one.rows() == 1);
  CHECK(one.value().allFinite());
  CHECK_THROWS_AS(bilstm_encode(tape.constant(Mat::Zero(0, 5)), p), ShapeError);
}

TEST_CASE("reversing the sequence swaps the halves under mirrored parameters") {
  ParameterSet set;
  Rng rng(4);
  const int hidden = 3;
  auto p = BiLstmParams::create(set, "enc", 2, hidden, 2, rng);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& [fwd, bwd] = p.layers[l];
    bwd.recurrent_weights->value = fwd.recurrent_weights->value;
    bwd.bias->value = fwd.bias->value;
    const Mat& w = fwd.input_weights->value;
    if (l == 0) {
      bwd.input_weights->value = w;
    } else {
      // The layer input is [forward | backward]; mirror it.
      Mat m(w.rows(), w.cols());
      m.topRows(hidden) = w.bottomRows(hidden);
      m.bottomRows(hidden) = w.topRows(hidden);
      bwd.input_weights->value = m;
    }
  }
  std::mt19937_64 g(5);
  const Mat x = random_matrix(6, 2, g);
  const Mat xr = x.colwise().reverse();
  Tape tape;
  const Mat a = bilstm_encode(tape.constant(x), p).value();
  const Mat b = bilstm_encode(tape.constant(xr), p).value();
  const Eigen::Index n = x.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK((b.row(i).leftCols(hidden) - a.row(n - 1 - i).rightCols(hidden)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((b.row(i).rightCols(hidden) - a.row(n - 1 - i).leftCols(hidden)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("attention on a single row is its value projection") {
  ParameterSet set;
  Rng rng(6);
  auto p = AttentionParams::create(set, "att", 4, 2, true, rng);
  std::mt19937_64 g(1);
  const Mat h = random_matrix(1, 4, g);
  Tape tape;
  const Mat m = multi_head_attention(tape.constant(h), p).value();
  Mat v(1, 4);
  v << h * p.value[0]->value, h * p.value[1]->value;
  CHECK((m - v * p.output->value).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("attention is row-permutation equivariant") {
  ParameterSet set;
  Rng rng(7);
  auto p = AttentionParams::create(set, "att", 8, 4, true, rng);
  std::mt19937_64 g(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat h = random_matrix(7, 8, g);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g);
    Mat hp(7, 8);
    for (int i = 0; i < 7; ++i) hp.row(i) = h.row(perm[static_cast<std::size_t>(i)]);
    Tape tape;
    const Mat m = multi_head_attention(tape.constant(h), p).value();
    const Mat mp = multi_head_attention(tape.constant(hp), p).value();
    for (int i = 0; i < 7; ++i) {
      CHECK((mp.row(i) - m.row(perm[static_cast<std::size_t>(i)])).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("attention rejects a model dim not divisible by heads") {
  ParameterSet set;
  Rng rng(1);
  CHECK_THROWS_AS(AttentionParams::create(set, "att", 6, 4, true, rng), ConfigError);
}

TEST_CASE("attention gradient check") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    for (bool full_scale : {true, false}) {
      ParameterSet set;
      Rng init(static_cast<std::uint64_t>(i));
      auto p = AttentionParams::create(set, "att", 4, 2, full_scale, init);
      const Mat w = random_matrix(3, 4, rng);
      const auto res = check_gradients(
          {random_matrix(3, 4, rng)},
          [&](Tape&, std::span<const Tensor> x) { return probe(multi_head_attention(x[0], p), w); }, &set);
      INFO(res.worst << " " << res.max_rel_error);
      CHECK(res.ok());
    }
  }
}

TEST_CASE("residual layer norm") {
  ParameterSet set;
  auto p = LayerNormParams::create(set, "norm", 4);
  std::mt19937_64 g(3);
  p.bias->value = random_matrix(1, 4, g);
  const Mat h = random_matrix(3, 4, g);
  Tape tape;
  const Mat out = residual_layernorm(tape.constant(-h), tape.constant(h), p).value();
  for (int r = 0; r < 3; ++r) CHECK((out.row(r) - p.bias->value).cwiseAbs().maxCoeff() == 0.0);

  p.bias->value.setZero();
  const Mat y = residual_layernorm(tape.constant(random_matrix(5, 4, g)), tape.constant(h.topRows(1).replicate(5, 1)), p).value();
  for (int r = 0; r < 5; ++r) {
    const Real mean = y.row(r).mean();
    const Real var = (y.row(r).array() - mean).square().mean();
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(var - 1) <= 1e-9);
  }

  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    ParameterSet s2;
    auto q = LayerNormParams::create(s2, "norm", 5);
    q.gain->value = random_matrix(1, 5, rng);
    q.bias->value = random_matrix(1, 5, rng);
    const Mat w = random_matrix(3, 5, rng);
    const auto res = check_gradients(
        {random_matrix(3, 5, rng), random_matrix(3, 5, rng)},
        [&](Tape&, std::span<const Tensor> x) { return probe(residual_layernorm(x[0], x[1], q), w); }, &s2);
    CHECK(res.ok());
  }
}

TEST_CASE("mlp head") {
  ParameterSet set;
  Rng rng(10);
  auto p = MlpParams::create(set, "mlp", 6, 6, 5, rng);
  std::mt19937_64 g(4);
  Tape tape;
  const Tensor out = mlp_head(tape.constant(random_matrix(10, 6, g)), p);
  CHECK(out.rows() == 10);
  CHECK(out.cols() == 5);
  for (std::size_t i = 0; i < set.size(); ++i) set[i].value.setZero();
  CHECK(mlp_head(tape.constant(random_matrix(3, 6, g)), p).value().cwiseAbs().maxCoeff() == 0.0);

  for (int i = 0; i < 20; ++i) {
    ParameterSet s2;
    Rng init(static_cast<std::uint64_t>(i));
    auto q = MlpParams::create(s2, "mlp", 4, 5, 2, init);
    q.hidden_bias->value = random_matrix(1, 5, g);
    const Mat w = random_matrix(3, 2, g);
    const auto res = check_gradients(
        {random_matrix(3, 4, g)}, [&](Tape&, std::span<const Tensor> x) { return probe(mlp_head(x[0], q), w); }, &s2);
    CHECK(res.ok());
  }
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.validate();
  c.model_dim = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("attncut forward is a distribution") {
  AttnCutModel model(tiny_config());
  std::mt19937_64 g(5);
  const auto p = model.probabilities(random_matrix(9, 5, g));
  CHECK(p.size() == 9);
  CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1) <= 1e-9);

  auto* out_w = model.parameters().find("decision.output_weights");
  auto* out_b = model.parameters().find("decision.output_bias");
  REQUIRE(out_w);
  REQUIRE(out_b);
  out_w->value.setZero();
  out_b->value.setZero();
  for (Real v : model.probabilities(random_matrix(4, 5, g))) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));

  Tape tape;
  CHECK_THROWS_AS(model.forward(tape, Mat::Zero(0, 5)), ShapeError);
  CHECK_THROWS_AS(model.forward(tape, Mat::Zero(3, 4)), ShapeError);
}

TEST_CASE("default-size model handles 300 documents") {
  AttnCutModel model{ModelConfig{}};
  std::mt19937_64 g(6);
  const auto p = model.probabilities(random_matrix(300, 5, g, -3, 3));
  CHECK(p.size() == 300);
  for (Real v : p) CHECK(std::isfinite(v));
  CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1) <= 1e-9);
}

TEST_CASE("full forward plus raml loss gradient check") {
  std::mt19937_64 g(7);
  for (int i = 0; i < 20; ++i) {
    ModelConfig cfg = tiny_config();
    cfg.hidden_size = 2;
    cfg.model_dim = 4;
    cfg.init_seed = static_cast<std::uint64_t>(i);
    AttnCutModel model(cfg);
    const Mat f = random_matrix(3, 5, g);
    std::vector<Real> q{0.2, 0.5, 0.3};
    const auto res = check_gradients(
        {},
        [&](Tape& tape, std::span<const Tensor>) {
          const Tensor p = model.forward(tape, f);
          Tensor loss = ad::scale(ad::sum(ad::cwise_product(tape.constant(Eigen::Map<const Mat>(q.data(), 3, 1)),
                                                            ad::log(p, 1e-12))),
                                  -1.0);
          return loss;
        },
        &model.parameters());
    INFO(res.worst << " " << res.max_rel_error);
    CHECK(res.ok());
  }
}

TEST_CASE("recall model rows are distributions") {
  RecallConstraintModel model(tiny_config(5), equal_width_bins(5));
  CHECK(model.bin_count() == 5);
  std::mt19937_64 g(8);
  const Mat p = model.probabilities(random_matrix(7, 5, g));
  CHECK(p.rows() == 7);
  CHECK(p.cols() == 5);
  for (int r = 0; r < 7; ++r) CHECK(std::abs(p.row(r).sum() - 1) <= 1e-9);
  model.parameters().find("decision.output_weights")->value.setZero();
  model.parameters().find("decision.output_bias")->value.setZero();
  const Mat u = model.probabilities(random_matrix(3, 5, g));
  CHECK((u.array() - 0.2).abs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS(RecallConstraintModel(tiny_config(5), std::vector<Real>{0, 0.5, 0.4, 1}), ConfigError);
}

TEST_CASE("recall bins") {
  const auto edges = equal_width_bins(5);
  CHECK(recall_bin_of(0.44, edges) == 2);
  CHECK(recall_bin_of(1.0, edges) == 4);
  CHECK(recall_bin_of(0.0, edges) == 0);
  const auto list = make_list("q", {1, -1, 1, 1, -1, -1, 1, -1});
  int prev = 0;
  for (std::size_t k = 1; k <= list.size(); ++k) {
    const int b = recall_bin_label(list, k, edges);
    CHECK(b >= prev);
    prev = b;
  }
  CHECK(prev == 4);
  CHECK_THROWS_AS(recall_bin_label(list, 0, edges), std::out_of_range);
  CHECK_THROWS_AS(recall_bin_label(list, 9, edges), std::out_of_range);
}

TEST_CASE("checkpoint round trip is bit exact") {
  AttnCutModel model(tiny_config());
  model.metadata.objective = "mle";
  model.metadata.metric = MetricName::kDcg;
  FeatureStats fs;
  fs.mean = Vec::Constant(5, 0.25);
  fs.stddev = Vec::Constant(5, 2.0);
  model.metadata.feature_stats = fs;
  const auto path = temp_path("model.ckpt");
  save_checkpoint(model, path);
  CHECK(checkpoint_kind(path) == "attncut");
  const AttnCutModel back = load_attncut_checkpoint(path);
  CHECK(back.config() == model.config());
  CHECK(back.metadata.objective == "mle");
  CHECK(back.metadata.metric == MetricName::kDcg);
  CHECK(*back.metadata.feature_stats == fs);
  for (std::size_t i = 0; i < model.network().parameters().size(); ++i) {
    CHECK(back.network().parameters()[i].name == model.network().parameters()[i].name);
    CHECK(back.network().parameters()[i].value == model.network().parameters()[i].value);
  }
  std::mt19937_64 g(9);
  const Mat f = random_matrix(6, 5, g);
  CHECK(back.probabilities(f) == model.probabilities(f));
  CHECK_THROWS_AS(load_recall_checkpoint(path), CheckpointFormatError);

  RecallConstraintModel recall(tiny_config(5), equal_width_bins(5));
  const auto rpath = temp_path("recall.ckpt");
  save_checkpoint(recall, rpath);
  CHECK(checkpoint_kind(rpath) == "recall");
  const RecallConstraintModel rback = load_recall_checkpoint(rpath);
  CHECK(rback.bin_edges() == recall.bin_edges());
  CHECK(rback.probabilities(f) == recall.probabilities(f));
  std::filesystem::remove(path);
  std::filesystem::remove(rpath);
}

TEST_CASE("checkpoint errors") {
  AttnCutModel model(tiny_config());
  const auto path = temp_path("err.ckpt");
  save_checkpoint(model, path);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{11}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(ad::decode_archive(bytes.substr(0, cut)), CheckpointFormatError);
  }
  CHECK_THROWS_AS(ad::decode_archive(bytes + "x"), CheckpointFormatError);
  std::string wrong_version = bytes;
  wrong_version[8] = 7;
  CHECK_THROWS_AS(ad::decode_archive(wrong_version), CheckpointVersionError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(ad::decode_archive(bad_magic), CheckpointFormatError);

  ModelConfig other = tiny_config();
  other.mlp_hidden = 7;
  AttnCutModel mismatched(other);
  const Mat before = mismatched.network().parameters()[0].value;
  try {
    load_parameters(mismatched, path);
    FAIL("expected ParameterShapeError");
  } catch (const ParameterShapeError& e) {
    CHECK(std::string(e.what()).find("decision.hidden_weights") != std::string::npos);
  }
  CHECK(mismatched.network().parameters()[0].value == before);

  auto archive = ad::read_archive(path);
  archive.tensors.erase(archive.tensors.begin());
  try {
    ad::restore_parameters(model.parameters(), archive);
    FAIL("expected MissingParameterError");
  } catch (const MissingParameterError& e) {
    CHECK(std::string(e.what()).find(model.network().parameters()[0].name) != std::string::npos);
  }
  CHECK_THROWS_AS(load_attncut_checkpoint(temp_path("does_not_exist.ckpt")), CheckpointError);
  std::filesystem::remove(path);
}

TEST_CASE("argmax is stable under rescaled scores after refitting the normalization") {
  SyntheticConfig sc;
  sc.n_queries = 40;
  sc.list_length = 30;
  Dataset ds = generate_synthetic(sc);
  Dataset scaled = ds;
  for (auto& list : scaled.lists) {
    auto docs = list.docs();
    for (auto& d : docs) d.retrieval_score *= 3.7;
    list = RankedList(list.query_id(), docs);
  }
  ds = normalize_features(ds);
  scaled = normalize_features(scaled);
  AttnCutModel model(tiny_config());
  std::size_t same = 0;
  for (std::size_t i = 0; i < ds.lists.size(); ++i) {
    same += argmax_position(model.probabilities(ds.features[i])) ==
                    argmax_position(model.probabilities(scaled.features[i]))
                ? 1
                : 0;
  }
  CHECK(static_cast<double>(same) >= 0.95 * static_cast<double>(ds.lists.size()));
}
