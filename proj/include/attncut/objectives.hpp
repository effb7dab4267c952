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

// Training objectives over a cut-position distribution p (N x 1 tensor).
//
// RAML replaces the one-hot target of maximum likelihood with the
// exponentiated, normalized reward q_k = softmax(r_k / tau). All logs are
// natural logs; probabilities are floored at kProbabilityFloor before the
// log.

#ifndef ATTNCUT_OBJECTIVES_HPP_
#define ATTNCUT_OBJECTIVES_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "attncut/data_model.hpp"
#include "attncut/layers.hpp"
#include "attncut/metrics.hpp"

namespace attncut {

inline constexpr Real kProbabilityFloor = 1e-12;

/// Number of probabilities clamped at kProbabilityFloor so far in this
/// process. The first clamp also logs a warning.
std::size_t probability_clamp_count();

struct RamlConfig {
  Real tau = 0.95;
  MetricName metric = MetricName::kF1;
};

struct BiCutLossConfig {
  Real alpha = 0.5;
  /// Normalization factor r in (0, 1); unset means "relevant fraction of
  /// the training set".
  std::optional<Real> r_norm;
  /// Restrict the sum to the first cut_k positions; unset means the full list.
  std::optional<std::size_t> cut_k;
};

struct RlConfig {
  Real gamma = 1.0;
  int traces = 1;
  /// Sample one position per list instead of the exact expectation.
  bool sampled = false;
};

/// q_k = exp(r_k / tau) / sum_n exp(r_n / tau), max-subtracted.
std::vector<Real> payoff_distribution(std::span<const Real> rewards, Real tau);

/// -ln p[k_star - 1].
Tensor mle_loss(const Tensor& p, std::size_t k_star);
/// -sum_k q_k ln p_k.
Tensor raml_loss(const Tensor& p, std::span<const Real> q);
/// sum over n <= cut_k of alpha 1[y_n = -1] p_n / (1 - r) + (1 - alpha) 1[y_n = +1] (1 - p_n) / r.
Tensor bicut_loss(const Tensor& p, std::span<const Relevance> labels, std::size_t cut_k, Real alpha, Real r_norm);
/// -sum_k p_k gamma^(l-1) r_k.
Tensor rl_loss(const Tensor& p, std::span<const Real> rewards, const RlConfig& cfg);
/// Score-function variant for one sampled position: -gamma^(l-1) r_k ln p_k.
Tensor rl_sampled_loss(const Tensor& p, std::span<const Real> rewards, const RlConfig& cfg, std::size_t sampled_k);
/// Mean over positions of -ln p'[n, label_n] for an N x B tensor.
Tensor recall_mle_loss(const Tensor& p_rows, std::span<const int> bin_labels);

/// Shannon entropy (natural log) of a distribution.
Real entropy(std::span<const Real> q);

enum class Objective { kMle, kRaml, kBiCut, kRl };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view s);

}  // namespace attncut

#endif  // ATTNCUT_OBJECTIVES_HPP_
