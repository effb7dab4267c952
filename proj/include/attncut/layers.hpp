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

// Neural building blocks: LSTM cell, stacked Bi-LSTM, multi-head
// self-attention, residual layer norm and the MLP decision head.
//
// Each *Params struct holds non-owning pointers into a ParameterSet; the
// `create` factories register uniformly initialized weights there under
// stable names.

#ifndef ATTNCUT_LAYERS_HPP_
#define ATTNCUT_LAYERS_HPP_

#include <random>
#include <string>
#include <vector>

#include "attncut/autodiff.hpp"
#include "attncut/data_model.hpp"

namespace attncut {

using Tensor = ad::Tensor<Real>;
using Tape = ad::Tape<Real>;
using Parameter = ad::Parameter<Real>;
using ParameterSet = ad::ParameterSet<Real>;
using Rng = std::mt19937_64;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

/// Gate order in the packed weights: input, forget, candidate, output.
struct LstmCellParams {
  Parameter* input_weights = nullptr;      // in x 4H
  Parameter* recurrent_weights = nullptr;  // H x 4H
  Parameter* bias = nullptr;               // 1 x 4H, forget slice starts at +1
  int hidden_size = 0;

  static LstmCellParams create(ParameterSet& set, const std::string& prefix, int input_size, int hidden_size,
                               Rng& rng);
};

struct LstmState {
  Tensor h;  // 1 x H
  Tensor c;  // 1 x H
};

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmCellParams& params);

/// One direction over a whole sequence (N x in). Returns N x H hidden
/// states in input order.
Tensor lstm_sequence(const Tensor& inputs, const LstmCellParams& params, bool reverse);

struct BiLstmParams {
  /// layers[l] = {forward, backward}
  std::vector<std::pair<LstmCellParams, LstmCellParams>> layers;

  static BiLstmParams create(ParameterSet& set, const std::string& prefix, int input_size, int hidden_size,
                             int num_layers, Rng& rng);
  int hidden_size() const { return layers.front().first.hidden_size; }
};

/// Stacked bidirectional encoder; row n is [forward_top(n) || backward_top(n)].
Tensor bilstm_encode(const Tensor& features, const BiLstmParams& params);

struct AttentionParams {
  std::vector<Parameter*> query;  // per head, t x t/h
  std::vector<Parameter*> key;
  std::vector<Parameter*> value;
  Parameter* output = nullptr;  // t x t
  int heads = 0;
  int model_dim = 0;
  /// Divide scores by sqrt(t); false uses sqrt(t/h).
  bool scale_by_model_dim = true;

  static AttentionParams create(ParameterSet& set, const std::string& prefix, int model_dim, int heads,
                                bool scale_by_model_dim, Rng& rng);
};

/// concat_i softmax(Q_i K_i^T / scale) V_i, then times the output projection.
Tensor multi_head_attention(const Tensor& h, const AttentionParams& params);

struct LayerNormParams {
  Parameter* gain = nullptr;
  Parameter* bias = nullptr;

  static LayerNormParams create(ParameterSet& set, const std::string& prefix, int dim);
};

/// LayerNorm(m + h) per row.
Tensor residual_layernorm(const Tensor& m, const Tensor& h, const LayerNormParams& params);

struct MlpParams {
  Parameter* hidden_weights = nullptr;
  Parameter* hidden_bias = nullptr;
  Parameter* output_weights = nullptr;
  Parameter* output_bias = nullptr;

  static MlpParams create(ParameterSet& set, const std::string& prefix, int input_dim, int hidden_dim,
                          int out_dim, Rng& rng);
};

/// relu(x W1 + b1) W2 + b2, row-wise.
Tensor mlp_head(const Tensor& x, const MlpParams& params);

}  // namespace attncut

#endif  // ATTNCUT_LAYERS_HPP_
