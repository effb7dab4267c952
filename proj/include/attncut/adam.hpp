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

#ifndef ATTNCUT_ADAM_HPP_
#define ATTNCUT_ADAM_HPP_

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "attncut/autodiff.hpp"

namespace attncut::ad {

template <typename Scalar>
struct AdamState {
  Scalar learning_rate = Scalar(3e-5);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
  long step_count = 0;
  std::vector<Matrix<Scalar>> first_moment;
  std::vector<Matrix<Scalar>> second_moment;
};

/// One bias-corrected Adam update over `params`, then zeroes their grads.
/// Moments are created lazily on the first step and must keep matching the
/// parameter list afterwards.
template <typename Scalar>
void adam_step(std::span<Parameter<Scalar>* const> params, AdamState<Scalar>& state) {
  for (const auto* p : params) {
    if (!p->has_grad()) throw std::invalid_argument("adam_step: parameter '" + p->name + "' has no gradient");
  }
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      state.second_moment.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameter list");
  }
  ++state.step_count;
  const Scalar c1 = Scalar(1) - std::pow(state.beta1, static_cast<Scalar>(state.step_count));
  const Scalar c2 = Scalar(1) - std::pow(state.beta2, static_cast<Scalar>(state.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<Scalar>& p = *params[i];
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    if (m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw std::invalid_argument("adam_step: moment shape mismatch for '" + p.name + "'");
    }
    m = state.beta1 * m + (Scalar(1) - state.beta1) * p.grad;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= state.learning_rate * (m.array() / c1) /
                       ((v.array() / c2).sqrt() + state.epsilon);
    p.grad.setZero();
  }
}

}  // namespace attncut::ad

#endif  // ATTNCUT_ADAM_HPP_
