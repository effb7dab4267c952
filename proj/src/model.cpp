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

#include "attncut/model.hpp"

#include <algorithm>

#include "attncut/errors.hpp"
#include "attncut/metrics.hpp"
#include "json.hpp"

namespace attncut {

void ModelConfig::validate() const {
  std::vector<std::string> problems;
  if (feature_dim < 1) problems.push_back("feature_dim must be positive");
  if (hidden_size < 1) problems.push_back("hidden_size must be positive");
  if (lstm_layers < 1) problems.push_back("lstm_layers must be positive");
  if (model_dim != 2 * hidden_size) problems.push_back("model_dim must equal 2 * hidden_size");
  if (heads < 1 || model_dim % heads != 0) problems.push_back("model_dim must be divisible by heads");
  if (mlp_hidden < 1) problems.push_back("mlp_hidden must be positive");
  if (out_dim < 1) problems.push_back("out_dim must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

Network::Network(const ModelConfig& cfg) : config_(cfg) {
  cfg.validate();
  Rng rng(cfg.init_seed);
  encoder_ = BiLstmParams::create(params_, "encoder", cfg.feature_dim, cfg.hidden_size, cfg.lstm_layers, rng);
  attention_ = AttentionParams::create(params_, "attention", cfg.model_dim, cfg.heads, cfg.scale_by_model_dim, rng);
  norm_ = LayerNormParams::create(params_, "norm", cfg.model_dim);
  mlp_ = MlpParams::create(params_, "decision", cfg.model_dim, cfg.mlp_hidden, cfg.out_dim, rng);
}

Tensor Network::logits(Tape& tape, const Mat& features) const {
  if (features.rows() < 1) throw ShapeError("empty ranked list");
  if (features.cols() != config_.feature_dim) {
    throw ShapeError("features " + ad::shape_string(features.rows(), features.cols()) + " vs feature_dim " +
                     std::to_string(config_.feature_dim));
  }
  const Tensor x = tape.constant(features);
  const Tensor h = bilstm_encode(x, encoder_);
  const Tensor m = multi_head_attention(h, attention_);
  const Tensor refined = residual_layernorm(m, h, norm_);
  return mlp_head(refined, mlp_);
}

AttnCutModel::AttnCutModel(ModelConfig cfg) : net_([&] {
  cfg.out_dim = 1;
  return cfg;
}()) {}

Tensor AttnCutModel::forward(Tape& tape, const Mat& features) const {
  return ad::softmax(net_.logits(tape, features), 0);
}

std::vector<Real> AttnCutModel::probabilities(const Mat& features) const {
  Tape tape;
  const Mat p = forward(tape, features).value();
  return {p.data(), p.data() + p.size()};
}

std::vector<Real> equal_width_bins(int bins) {
  if (bins < 1) throw ConfigError("bin count must be positive");
  std::vector<Real> edges(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = static_cast<Real>(i) / bins;
  edges.back() = 1.0;
  return edges;
}

namespace {

void check_edges(const std::vector<Real>& edges) {
  if (edges.size() < 2 || edges.front() != 0.0 || edges.back() != 1.0) {
    throw ConfigError("bin edges must run from 0 to 1");
  }
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ConfigError("bin edges must be strictly increasing");
  }
}

}  // namespace

RecallConstraintModel::RecallConstraintModel(ModelConfig cfg, std::vector<Real> bin_edges)
    : net_([&] {
        check_edges(bin_edges);
        cfg.out_dim = static_cast<int>(bin_edges.size()) - 1;
        return cfg;
      }()),
      bin_edges_(std::move(bin_edges)) {
  metadata.kind = "recall";
  metadata.objective = "mle";
  metadata.bin_edges = bin_edges_;
}

Tensor RecallConstraintModel::forward(Tape& tape, const Mat& features) const {
  return ad::softmax(net_.logits(tape, features), 1);
}

Mat RecallConstraintModel::probabilities(const Mat& features) const {
  Tape tape;
  return forward(tape, features).value();
}

int recall_bin_of(Real recall, const std::vector<Real>& edges) {
  check_edges(edges);
  if (recall >= edges.back()) return static_cast<int>(edges.size()) - 2;
  const auto it = std::upper_bound(edges.begin(), edges.end(), recall);
  return std::max(0, static_cast<int>(it - edges.begin()) - 1);
}

int recall_bin_label(const RankedList& list, std::size_t k, const std::vector<Real>& edges) {
  return recall_bin_of(recall_at(list, k), edges);
}

// --- checkpoints -----------------------------------------------------------

namespace {

using nlohmann::json;

json config_json(const ModelConfig& c) {
  return {{"feature_dim", c.feature_dim}, {"hidden_size", c.hidden_size}, {"lstm_layers", c.lstm_layers},
          {"model_dim", c.model_dim},     {"heads", c.heads},             {"mlp_hidden", c.mlp_hidden},
          {"out_dim", c.out_dim},         {"scale_by_model_dim", c.scale_by_model_dim},
          {"init_seed", c.init_seed}};
}

ModelConfig json_config(const json& j) {
  ModelConfig c;
  c.feature_dim = j.at("feature_dim").get<int>();
  c.hidden_size = j.at("hidden_size").get<int>();
  c.lstm_layers = j.at("lstm_layers").get<int>();
  c.model_dim = j.at("model_dim").get<int>();
  c.heads = j.at("heads").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.out_dim = j.at("out_dim").get<int>();
  c.scale_by_model_dim = j.at("scale_by_model_dim").get<bool>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

std::string encode_metadata(const ModelConfig& cfg, const ModelMetadata& m) {
  json j = {{"kind", m.kind},
            {"config", config_json(cfg)},
            {"metric", std::string(to_string(m.metric))},
            {"objective", m.objective},
            {"layout", m.layout},
            {"bin_edges", m.bin_edges}};
  if (m.feature_stats) {
    const auto& s = *m.feature_stats;
    j["feature_stats"] = {{"mean", std::vector<Real>(s.mean.data(), s.mean.data() + s.mean.size())},
                          {"std", std::vector<Real>(s.stddev.data(), s.stddev.data() + s.stddev.size())}};
  } else {
    j["feature_stats"] = nullptr;
  }
  return j.dump();
}

struct Decoded {
  ModelConfig config;
  ModelMetadata metadata;
};

Decoded decode_metadata(const std::string& text) {
  try {
    const json j = json::parse(text);
    Decoded d;
    d.config = json_config(j.at("config"));
    d.metadata.kind = j.at("kind").get<std::string>();
    d.metadata.metric = parse_metric_name(j.at("metric").get<std::string>());
    d.metadata.objective = j.at("objective").get<std::string>();
    d.metadata.layout = j.at("layout").get<FeatureLayout>();
    d.metadata.bin_edges = j.at("bin_edges").get<std::vector<Real>>();
    if (!j.at("feature_stats").is_null()) {
      const auto mean = j["feature_stats"].at("mean").get<std::vector<Real>>();
      const auto sd = j["feature_stats"].at("std").get<std::vector<Real>>();
      d.metadata.feature_stats = FeatureStats{Eigen::Map<const Vec>(mean.data(), static_cast<Eigen::Index>(mean.size())),
                                              Eigen::Map<const Vec>(sd.data(), static_cast<Eigen::Index>(sd.size()))};
    }
    return d;
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("bad checkpoint metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointFormatError(std::string("bad checkpoint metadata: ") + e.what());
  }
}

template <typename Model>
void save_any(const Model& model, const std::filesystem::path& path) {
  const auto archive = ad::archive_parameters(model.network().parameters(),
                                              encode_metadata(model.config(), model.metadata));
  ad::write_archive(path, archive);
}

}  // namespace

void save_checkpoint(const AttnCutModel& model, const std::filesystem::path& path) { save_any(model, path); }
void save_checkpoint(const RecallConstraintModel& model, const std::filesystem::path& path) { save_any(model, path); }

std::string checkpoint_kind(const std::filesystem::path& path) {
  return decode_metadata(ad::read_archive(path).metadata).metadata.kind;
}

AttnCutModel load_attncut_checkpoint(const std::filesystem::path& path) {
  const auto archive = ad::read_archive(path);
  auto decoded = decode_metadata(archive.metadata);
  if (decoded.metadata.kind != "attncut") {
    throw CheckpointFormatError("'" + path.string() + "' holds a " + decoded.metadata.kind + " model");
  }
  AttnCutModel model(decoded.config);
  ad::restore_parameters(model.parameters(), archive);
  model.metadata = std::move(decoded.metadata);
  return model;
}

RecallConstraintModel load_recall_checkpoint(const std::filesystem::path& path) {
  const auto archive = ad::read_archive(path);
  auto decoded = decode_metadata(archive.metadata);
  if (decoded.metadata.kind != "recall") {
    throw CheckpointFormatError("'" + path.string() + "' holds a " + decoded.metadata.kind + " model");
  }
  RecallConstraintModel model(decoded.config, decoded.metadata.bin_edges);
  ad::restore_parameters(model.parameters(), archive);
  model.metadata = std::move(decoded.metadata);
  return model;
}

void load_parameters(AttnCutModel& model, const std::filesystem::path& path) {
  ad::restore_parameters(model.parameters(), ad::read_archive(path));
}

}  // namespace attncut
