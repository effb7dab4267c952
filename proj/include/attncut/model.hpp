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

// The truncation network: Bi-LSTM encoder, one self-attention block with a
// residual layer norm, and an MLP that scores every cut position.
//
// AttnCutModel turns the per-position scores into one distribution over
// cut positions. RecallConstraintModel emits B logits per position and
// classifies each position into an ordered recall bin.

#ifndef ATTNCUT_MODEL_HPP_
#define ATTNCUT_MODEL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "attncut/data_model.hpp"
#include "attncut/layers.hpp"
#include "attncut/tensor_archive.hpp"

namespace attncut {

struct ModelConfig {
  int feature_dim = static_cast<int>(kFeatureDim);
  int hidden_size = 128;  // per direction
  int lstm_layers = 2;
  int model_dim = 256;    // t, must be 2 * hidden_size
  int heads = 4;
  int mlp_hidden = 256;
  int out_dim = 1;
  bool scale_by_model_dim = true;
  std::uint64_t init_seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

class Network {
 public:
  explicit Network(const ModelConfig& cfg);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  /// N x out_dim logits for one list's normalized N x feature_dim features.
  Tensor logits(Tape& tape, const Mat& features) const;

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

 private:
  ModelConfig config_;
  ParameterSet params_;
  BiLstmParams encoder_;
  AttentionParams attention_;
  LayerNormParams norm_;
  MlpParams mlp_;
};

/// Everything besides raw weights needed to reuse a trained model.
struct ModelMetadata {
  std::string kind = "attncut";  // "attncut" or "recall"
  MetricName metric = MetricName::kF1;
  std::string objective = "raml";
  FeatureLayout layout = default_feature_layout();
  std::optional<FeatureStats> feature_stats;
  std::vector<Real> bin_edges;
};

class AttnCutModel {
 public:
  explicit AttnCutModel(ModelConfig cfg);

  /// N x 1 column of cut-position probabilities.
  Tensor forward(Tape& tape, const Mat& features) const;
  std::vector<Real> probabilities(const Mat& features) const;

  Network& network() { return net_; }
  const Network& network() const { return net_; }
  const ModelConfig& config() const { return net_.config(); }
  ParameterSet& parameters() { return net_.parameters(); }
  ModelMetadata metadata;

 private:
  Network net_;
};

/// Equal-width edges 0, 1/B, ..., 1.
std::vector<Real> equal_width_bins(int bins);

class RecallConstraintModel {
 public:
  RecallConstraintModel(ModelConfig cfg, std::vector<Real> bin_edges);

  /// N x B rows, each a distribution over recall bins.
  Tensor forward(Tape& tape, const Mat& features) const;
  Mat probabilities(const Mat& features) const;

  int bin_count() const { return static_cast<int>(bin_edges_.size()) - 1; }
  const std::vector<Real>& bin_edges() const { return bin_edges_; }
  Network& network() { return net_; }
  const Network& network() const { return net_; }
  const ModelConfig& config() const { return net_.config(); }
  ParameterSet& parameters() { return net_.parameters(); }
  ModelMetadata metadata;

 private:
  Network net_;
  std::vector<Real> bin_edges_;
};

/// Index i with edges[i] <= R@k < edges[i+1]; R@k = 1 lands in the last bin.
int recall_bin_label(const RankedList& list, std::size_t k, const std::vector<Real>& edges);
int recall_bin_of(Real recall, const std::vector<Real>& edges);

void save_checkpoint(const AttnCutModel& model, const std::filesystem::path& path);
void save_checkpoint(const RecallConstraintModel& model, const std::filesystem::path& path);

/// Kind recorded in a checkpoint ("attncut" or "recall").
std::string checkpoint_kind(const std::filesystem::path& path);

AttnCutModel load_attncut_checkpoint(const std::filesystem::path& path);
RecallConstraintModel load_recall_checkpoint(const std::filesystem::path& path);

/// Loads weights into an existing model of a fixed configuration.
void load_parameters(AttnCutModel& model, const std::filesystem::path& path);

}  // namespace attncut

#endif  // ATTNCUT_MODEL_HPP_
