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

#include "attncut/layers.hpp"

#include <cmath>

#include "attncut/errors.hpp"

namespace attncut {

using ad::shape_string;

Mat uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
  std::uniform_real_distribution<Real> dist(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

LstmCellParams LstmCellParams::create(ParameterSet& set, const std::string& prefix, int input_size,
                                      int hidden_size, Rng& rng) {
  LstmCellParams p;
  p.hidden_size = hidden_size;
  p.input_weights = &set.add(prefix + ".input_weights", uniform_init(input_size, 4 * hidden_size, input_size, rng));
  p.recurrent_weights =
      &set.add(prefix + ".recurrent_weights", uniform_init(hidden_size, 4 * hidden_size, hidden_size, rng));
  Mat bias = Mat::Zero(1, 4 * hidden_size);
  bias.middleCols(hidden_size, hidden_size).setOnes();
  p.bias = &set.add(prefix + ".bias", std::move(bias));
  return p;
}

namespace {

// Gate nonlinearities on a packed 1 x 4H pre-activation.
LstmState lstm_gates(const Tensor& pre, const Tensor& c_prev, int hidden) {
  const Tensor i = ad::sigmoid(ad::slice(pre, 0, 1, 0, hidden));
  const Tensor f = ad::sigmoid(ad::slice(pre, 0, 1, hidden, hidden));
  const Tensor g = ad::tanh(ad::slice(pre, 0, 1, 2 * hidden, hidden));
  const Tensor o = ad::sigmoid(ad::slice(pre, 0, 1, 3 * hidden, hidden));
  const Tensor c = ad::cwise_product(f, c_prev) + ad::cwise_product(i, g);
  const Tensor h = ad::cwise_product(o, ad::tanh(c));
  return {h, c};
}

void check_state(const LstmState& s, int hidden) {
  if (s.h.rows() != 1 || s.h.cols() != hidden || s.c.rows() != 1 || s.c.cols() != hidden) {
    throw ShapeError("lstm_cell: state shapes " + shape_string(s.h.rows(), s.h.cols()) + " / " +
                     shape_string(s.c.rows(), s.c.cols()) + " vs hidden size " + std::to_string(hidden));
  }
}

}  // namespace

LstmState lstm_cell(const Tensor& x, const LstmState& prev, const LstmCellParams& params) {
  Tape& tape = x.tape();
  const int hidden = params.hidden_size;
  check_state(prev, hidden);
  if (x.rows() != 1 || x.cols() != params.input_weights->value.rows()) {
    throw ShapeError("lstm_cell: input " + shape_string(x.rows(), x.cols()) + " vs input weights " +
                     shape_string(params.input_weights->value.rows(), params.input_weights->value.cols()));
  }
  const Tensor pre = ad::matmul(x, tape.parameter(*params.input_weights)) +
                     ad::matmul(prev.h, tape.parameter(*params.recurrent_weights)) +
                     tape.parameter(*params.bias);
  return lstm_gates(pre, prev.c, hidden);
}

Tensor lstm_sequence(const Tensor& inputs, const LstmCellParams& params, bool reverse) {
  Tape& tape = inputs.tape();
  const int hidden = params.hidden_size;
  const Eigen::Index n = inputs.rows();
  if (n < 1) throw ShapeError("lstm_sequence: empty sequence");
  if (inputs.cols() != params.input_weights->value.rows()) {
    throw ShapeError("lstm_sequence: input " + shape_string(inputs.rows(), inputs.cols()) + " vs input weights " +
                     shape_string(params.input_weights->value.rows(), params.input_weights->value.cols()));
  }
  // Input projections for all steps in one product; only the recurrence is
  // sequential.
  const Tensor projected =
      ad::add_row(ad::matmul(inputs, tape.parameter(*params.input_weights)), tape.parameter(*params.bias));
  const Tensor recurrent = tape.parameter(*params.recurrent_weights);
  LstmState state{tape.constant(Mat::Zero(1, hidden)), tape.constant(Mat::Zero(1, hidden))};
  std::vector<Tensor> outputs(static_cast<std::size_t>(n));
  for (Eigen::Index step = 0; step < n; ++step) {
    const Eigen::Index pos = reverse ? n - 1 - step : step;
    const Tensor pre = ad::row(projected, pos) + ad::matmul(state.h, recurrent);
    state = lstm_gates(pre, state.c, hidden);
    outputs[static_cast<std::size_t>(pos)] = state.h;
  }
  return ad::concat_rows<Real>(outputs);
}

BiLstmParams BiLstmParams::create(ParameterSet& set, const std::string& prefix, int input_size, int hidden_size,
                                  int num_layers, Rng& rng) {
  BiLstmParams p;
  for (int l = 0; l < num_layers; ++l) {
    const int in = l == 0 ? input_size : 2 * hidden_size;
    const std::string base = prefix + ".layer" + std::to_string(l);
    auto fwd = LstmCellParams::create(set, base + ".forward", in, hidden_size, rng);
    auto bwd = LstmCellParams::create(set, base + ".backward", in, hidden_size, rng);
    p.layers.emplace_back(fwd, bwd);
  }
  return p;
}

Tensor bilstm_encode(const Tensor& features, const BiLstmParams& params) {
  if (features.rows() < 1) throw ShapeError("bilstm_encode: empty sequence");
  Tensor x = features;
  for (const auto& [fwd, bwd] : params.layers) {
    x = ad::concat_cols({lstm_sequence(x, fwd, false), lstm_sequence(x, bwd, true)});
  }
  return x;
}

AttentionParams AttentionParams::create(ParameterSet& set, const std::string& prefix, int model_dim, int heads,
                                        bool scale_by_model_dim, Rng& rng) {
  if (heads < 1 || model_dim % heads != 0) {
    throw ConfigError("model dimension " + std::to_string(model_dim) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  AttentionParams p;
  p.heads = heads;
  p.model_dim = model_dim;
  p.scale_by_model_dim = scale_by_model_dim;
  const int head_dim = model_dim / heads;
  for (int i = 0; i < heads; ++i) {
    const std::string h = std::to_string(i);
    p.query.push_back(&set.add(prefix + ".query." + h, uniform_init(model_dim, head_dim, model_dim, rng)));
    p.key.push_back(&set.add(prefix + ".key." + h, uniform_init(model_dim, head_dim, model_dim, rng)));
    p.value.push_back(&set.add(prefix + ".value." + h, uniform_init(model_dim, head_dim, model_dim, rng)));
  }
  p.output = &set.add(prefix + ".output", uniform_init(model_dim, model_dim, model_dim, rng));
  return p;
}

Tensor multi_head_attention(const Tensor& h, const AttentionParams& params) {
  if (h.cols() != params.model_dim) {
    throw ShapeError("multi_head_attention: input " + shape_string(h.rows(), h.cols()) + " vs model dim " +
                     std::to_string(params.model_dim));
  }
  Tape& tape = h.tape();
  const Real divisor = std::sqrt(static_cast<Real>(
      params.scale_by_model_dim ? params.model_dim : params.model_dim / params.heads));
  std::vector<Tensor> heads;
  heads.reserve(static_cast<std::size_t>(params.heads));
  for (int i = 0; i < params.heads; ++i) {
    const Tensor q = ad::matmul(h, tape.parameter(*params.query[static_cast<std::size_t>(i)]));
    const Tensor k = ad::matmul(h, tape.parameter(*params.key[static_cast<std::size_t>(i)]));
    const Tensor v = ad::matmul(h, tape.parameter(*params.value[static_cast<std::size_t>(i)]));
    const Tensor scores = ad::scale(ad::matmul(q, ad::transpose(k)), 1.0 / divisor);
    heads.push_back(ad::matmul(ad::softmax(scores, 1), v));
  }
  return ad::matmul(ad::concat_cols<Real>(heads), tape.parameter(*params.output));
}

LayerNormParams LayerNormParams::create(ParameterSet& set, const std::string& prefix, int dim) {
  LayerNormParams p;
  p.gain = &set.add(prefix + ".gain", Mat::Ones(1, dim));
  p.bias = &set.add(prefix + ".bias", Mat::Zero(1, dim));
  return p;
}

Tensor residual_layernorm(const Tensor& m, const Tensor& h, const LayerNormParams& params) {
  Tape& tape = m.tape();
  return ad::layer_norm(m + h, tape.parameter(*params.gain), tape.parameter(*params.bias));
}

MlpParams MlpParams::create(ParameterSet& set, const std::string& prefix, int input_dim, int hidden_dim,
                            int out_dim, Rng& rng) {
  MlpParams p;
  p.hidden_weights = &set.add(prefix + ".hidden_weights", uniform_init(input_dim, hidden_dim, input_dim, rng));
  p.hidden_bias = &set.add(prefix + ".hidden_bias", Mat::Zero(1, hidden_dim));
  p.output_weights = &set.add(prefix + ".output_weights", uniform_init(hidden_dim, out_dim, hidden_dim, rng));
  p.output_bias = &set.add(prefix + ".output_bias", Mat::Zero(1, out_dim));
  return p;
}

Tensor mlp_head(const Tensor& x, const MlpParams& params) {
  Tape& tape = x.tape();
  const Tensor hidden = ad::relu(
      ad::add_row(ad::matmul(x, tape.parameter(*params.hidden_weights)), tape.parameter(*params.hidden_bias)));
  return ad::add_row(ad::matmul(hidden, tape.parameter(*params.output_weights)), tape.parameter(*params.output_bias));
}

}  // namespace attncut
