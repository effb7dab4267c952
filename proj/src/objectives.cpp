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

#include "attncut/objectives.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <string>

#include "attncut/errors.hpp"

namespace attncut {
namespace {

std::atomic<std::size_t> g_clamps{0};

void note_clamps(const Mat& p) {
  const auto n = static_cast<std::size_t>((p.array() < kProbabilityFloor).count());
  if (n == 0) return;
  if (g_clamps.fetch_add(n) == 0) {
    std::clog << "warning: probability below " << kProbabilityFloor << " clamped before log\n";
  }
}

Tensor floored_log(const Tensor& p) {
  note_clamps(p.value());
  return ad::log(p, kProbabilityFloor);
}

void check_column(const char* what, const Tensor& p, std::size_t n) {
  if (p.cols() != 1 || static_cast<std::size_t>(p.rows()) != n) {
    throw ShapeError(std::string(what) + ": distribution " + ad::shape_string(p.rows(), p.cols()) +
                     " vs length " + std::to_string(n));
  }
}

}  // namespace

std::size_t probability_clamp_count() { return g_clamps.load(); }

std::vector<Real> payoff_distribution(std::span<const Real> rewards, Real tau) {
  if (!(tau > 0) || !std::isfinite(tau)) throw ConfigError("tau must be finite and positive");
  if (rewards.empty()) throw std::invalid_argument("payoff_distribution: empty reward vector");
  for (Real r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("payoff_distribution: non-finite reward");
  }
  const Real top = *std::max_element(rewards.begin(), rewards.end());
  std::vector<Real> q(rewards.size());
  Real z = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = std::exp((rewards[i] - top) / tau);
    z += q[i];
  }
  for (Real& v : q) v /= z;
  return q;
}

Tensor mle_loss(const Tensor& p, std::size_t k_star) {
  if (p.cols() != 1 || k_star < 1 || k_star > static_cast<std::size_t>(p.rows())) {
    throw std::out_of_range("mle_loss: k* = " + std::to_string(k_star) + " outside distribution " +
                            ad::shape_string(p.rows(), p.cols()));
  }
  return -floored_log(ad::slice(p, static_cast<Eigen::Index>(k_star) - 1, 1, 0, 1));
}

Tensor raml_loss(const Tensor& p, std::span<const Real> q) {
  check_column("raml_loss", p, q.size());
  const Tensor target = p.tape().constant(Eigen::Map<const Mat>(q.data(), static_cast<Eigen::Index>(q.size()), 1));
  return -ad::sum(ad::cwise_product(target, floored_log(p)));
}

Tensor bicut_loss(const Tensor& p, std::span<const Relevance> labels, std::size_t cut_k, Real alpha, Real r_norm) {
  check_column("bicut_loss", p, labels.size());
  if (!(r_norm > 0 && r_norm < 1)) throw ConfigError("BiCut normalization factor must lie strictly in (0,1)");
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("BiCut alpha must lie in [0,1]");
  if (cut_k < 1 || cut_k > labels.size()) throw std::out_of_range("bicut_loss: cut_k outside [1,N]");
  // Linear in p: sum_n a_n p_n + c with per-position weights.
  const auto n = static_cast<Eigen::Index>(labels.size());
  Mat weights = Mat::Zero(n, 1);
  Real offset = 0;
  for (std::size_t i = 0; i < cut_k; ++i) {
    if (is_relevant(labels[i])) {
      weights(static_cast<Eigen::Index>(i), 0) = -(1 - alpha) / r_norm;
      offset += (1 - alpha) / r_norm;
    } else {
      weights(static_cast<Eigen::Index>(i), 0) = alpha / (1 - r_norm);
    }
  }
  Tape& tape = p.tape();
  Mat c(1, 1);
  c(0, 0) = offset;
  return ad::sum(ad::cwise_product(tape.constant(std::move(weights)), p)) + tape.constant(std::move(c));
}

namespace {

Real discount(const RlConfig& cfg) {
  if (!(cfg.gamma > 0 && cfg.gamma <= 1)) throw ConfigError("RL gamma must lie in (0,1]");
  if (cfg.traces < 1) throw ConfigError("RL traces must be >= 1");
  return std::pow(cfg.gamma, cfg.traces - 1);
}

}  // namespace

Tensor rl_loss(const Tensor& p, std::span<const Real> rewards, const RlConfig& cfg) {
  check_column("rl_loss", p, rewards.size());
  const Real d = discount(cfg);
  Mat r = Eigen::Map<const Mat>(rewards.data(), static_cast<Eigen::Index>(rewards.size()), 1) * (-d);
  return ad::sum(ad::cwise_product(p.tape().constant(std::move(r)), p));
}

Tensor rl_sampled_loss(const Tensor& p, std::span<const Real> rewards, const RlConfig& cfg, std::size_t sampled_k) {
  check_column("rl_sampled_loss", p, rewards.size());
  if (sampled_k < 1 || sampled_k > rewards.size()) throw std::out_of_range("rl_sampled_loss: k outside [1,N]");
  const Real d = discount(cfg);
  const Tensor logp = floored_log(ad::slice(p, static_cast<Eigen::Index>(sampled_k) - 1, 1, 0, 1));
  return ad::scale(logp, -d * rewards[sampled_k - 1]);
}

Tensor recall_mle_loss(const Tensor& p_rows, std::span<const int> bin_labels) {
  if (static_cast<std::size_t>(p_rows.rows()) != bin_labels.size()) {
    throw ShapeError("recall_mle_loss: " + ad::shape_string(p_rows.rows(), p_rows.cols()) + " vs " +
                     std::to_string(bin_labels.size()) + " labels");
  }
  Mat onehot = Mat::Zero(p_rows.rows(), p_rows.cols());
  for (std::size_t i = 0; i < bin_labels.size(); ++i) {
    if (bin_labels[i] < 0 || bin_labels[i] >= p_rows.cols()) {
      throw std::out_of_range("recall bin label " + std::to_string(bin_labels[i]) + " outside [0," +
                              std::to_string(p_rows.cols()) + ")");
    }
    onehot(static_cast<Eigen::Index>(i), bin_labels[i]) = 1;
  }
  const Tensor picked = ad::cwise_product(p_rows.tape().constant(std::move(onehot)), floored_log(p_rows));
  return ad::scale(ad::sum(picked), -1.0 / static_cast<Real>(bin_labels.size()));
}

Real entropy(std::span<const Real> q) {
  Real h = 0;
  for (Real v : q) {
    if (v > 0) h -= v * std::log(v);
  }
  return h;
}

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::kMle:
      return "mle";
    case Objective::kRaml:
      return "raml";
    case Objective::kBiCut:
      return "bicut";
    case Objective::kRl:
      return "rl";
  }
  return "raml";
}

Objective parse_objective(std::string_view s) {
  if (s == "mle") return Objective::kMle;
  if (s == "raml") return Objective::kRaml;
  if (s == "bicut") return Objective::kBiCut;
  if (s == "rl") return Objective::kRl;
  throw ConfigError("unknown objective '" + std::string(s) + "' (expected mle, raml, bicut or rl)");
}

}  // namespace attncut
