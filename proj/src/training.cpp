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

#include "attncut/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "attncut/adam.hpp"
#include "attncut/errors.hpp"
#include "attncut/metrics.hpp"
#include "json.hpp"

namespace attncut {

void TrainConfig::validate() const {
  std::vector<std::string> problems;
  if (batch_size < 1) problems.push_back("batch_size must be >= 1");
  if (epochs < 1) problems.push_back("epochs must be >= 1");
  if (!(learning_rate > 0) || !std::isfinite(learning_rate)) problems.push_back("learning_rate must be positive");
  if (early_stop_patience < 0) problems.push_back("early_stop_patience must be >= 0");
  if (!(raml.tau > 0) || !std::isfinite(raml.tau)) problems.push_back("tau must be finite and positive");
  if (!(bicut.alpha >= 0 && bicut.alpha <= 1)) problems.push_back("bicut alpha must be in [0,1]");
  if (bicut.r_norm && !(*bicut.r_norm > 0 && *bicut.r_norm < 1)) problems.push_back("bicut r must be in (0,1)");
  if (!(rl.gamma > 0 && rl.gamma <= 1)) problems.push_back("gamma must be in (0,1]");
  if (rl.traces < 1) problems.push_back("traces must be >= 1");
  if (!(validation_fraction >= 0 && validation_fraction < 1)) problems.push_back("validation_fraction must be in [0,1)");
  if (!problems.empty()) {
    std::string msg = "invalid training config:";
    for (const auto& p : problems) msg += " " + p + ";";
    throw ConfigError(msg);
  }
}

Real relevant_fraction(const Dataset& ds) {
  std::size_t rel = 0;
  std::size_t total = 0;
  for (const auto& l : ds.lists) {
    rel += l.n_relevant();
    total += l.size();
  }
  return total == 0 ? 0.0 : static_cast<Real>(rel) / static_cast<Real>(total);
}

Real mean_argmax_metric(const AttnCutModel& model, const Dataset& ds, MetricName metric) {
  if (ds.lists.empty()) return 0;
  Real total = 0;
  for (std::size_t i = 0; i < ds.lists.size(); ++i) {
    const auto p = model.probabilities(ds.features[i]);
    total += metric_at(ds.lists[i], argmax_position(p), metric);
  }
  return total / static_cast<Real>(ds.lists.size());
}

void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log) {
  for (const auto& r : log) {
    nlohmann::json j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_metric", r.val_metric},
                        {"wall_ms", r.wall_ms}};
    out << j.dump() << '\n';
  }
}

namespace {

void require_normalized(const Dataset& ds, const char* what) {
  if (ds.lists.empty()) throw ConfigError(std::string(what) + " has no lists");
  if (ds.features.size() != ds.lists.size()) throw ConfigError(std::string(what) + " is not normalized");
}

// Index lists of the fitting and validation parts.
struct Partition {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> val;
  const Dataset* val_ds = nullptr;
};

Partition partition(const Dataset& train_ds, const TrainConfig& cfg, const Dataset* validation) {
  Partition part;
  const std::size_t n = train_ds.lists.size();
  if (validation != nullptr) {
    require_normalized(*validation, "validation set");
    part.fit.resize(n);
    std::iota(part.fit.begin(), part.fit.end(), 0);
    part.val.resize(validation->lists.size());
    std::iota(part.val.begin(), part.val.end(), 0);
    part.val_ds = validation;
    return part;
  }
  part.val_ds = &train_ds;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto n_val = static_cast<std::size_t>(std::ceil(cfg.validation_fraction * static_cast<Real>(n)));
  if (cfg.validation_fraction == 0 || n < 2) {
    part.fit = order;
    part.val = order;
    return part;
  }
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::mt19937_64 rng(cfg.seed ^ 0x5eedf00dULL);
  std::shuffle(order.begin(), order.end(), rng);
  part.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  part.fit.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(part.val.begin(), part.val.end());
  std::sort(part.fit.begin(), part.fit.end());
  return part;
}

// Shared epoch / batch / early-stopping driver. `list_loss` records one
// list's loss on a tape; `validate` scores the current parameters (higher
// is better).
template <typename LossFn, typename ValFn>
TrainResult run_training(ParameterSet& params, const Dataset& train_ds, const TrainConfig& cfg,
                         const Partition& part, LossFn&& list_loss, ValFn&& validate, const EpochCallback& on_epoch) {
  ad::AdamState<Real> adam;
  adam.learning_rate = cfg.learning_rate;
  auto pointers = params.pointers();
  std::mt19937_64 rng(cfg.seed);

  TrainResult result;
  result.best_val_metric = validate(part);
  result.best_epoch = 0;
  auto best = params.snapshot();
  int stale = 0;

  std::vector<std::size_t> order = part.fit;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    Real loss_sum = 0;
    std::size_t batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const Real weight = 1.0 / static_cast<Real>(end - b);
      params.zero_grad();
      for (std::size_t j = b; j < end; ++j) {
        const std::size_t idx = order[j];
        Tape tape;
        const Tensor loss = list_loss(tape, idx, rng);
        const Real value = loss.value()(0, 0);
        if (!std::isfinite(value)) {
          throw TrainingDivergedError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(batch_index) + " (query '" + train_ds.lists[idx].query_id() +
                                      "')");
        }
        loss_sum += value;
        tape.backward(ad::scale(loss, weight));
      }
      ad::adam_step<Real>(pointers, adam);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<Real>(order.size());
    rec.val_metric = validate(part);
    rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (rec.val_metric > result.best_val_metric) {
      result.best_val_metric = rec.val_metric;
      result.best_epoch = epoch;
      best = params.snapshot();
      stale = 0;
    } else if (cfg.early_stop_patience > 0 && ++stale >= cfg.early_stop_patience) {
      break;
    }
  }
  params.restore(best);
  return result;
}

}  // namespace

TrainResult train(AttnCutModel& model, const Dataset& train_ds, const TrainConfig& cfg, const Dataset* validation,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  require_normalized(train_ds, "training set");
  const Partition part = partition(train_ds, cfg, validation);

  // Per-list targets are fixed by the labels, so they are computed once.
  const std::size_t n = train_ds.lists.size();
  std::vector<std::vector<Real>> rewards(n);
  std::vector<std::vector<Real>> targets(n);
  std::vector<std::size_t> k_star(n);
  for (std::size_t i = 0; i < n; ++i) {
    rewards[i] = reward_vector(train_ds.lists[i], cfg.metric).values;
    k_star[i] = argmax_position(rewards[i]);
    if (cfg.objective == Objective::kRaml) targets[i] = payoff_distribution(rewards[i], cfg.raml.tau);
  }
  const Real r_norm = cfg.bicut.r_norm.value_or(relevant_fraction(train_ds));
  if (cfg.objective == Objective::kBiCut && !(r_norm > 0 && r_norm < 1)) {
    throw ConfigError("BiCut normalization factor must lie in (0,1); the training set relevant fraction is " +
                      std::to_string(r_norm));
  }

  auto list_loss = [&](Tape& tape, std::size_t i, std::mt19937_64& rng) -> Tensor {
    const Tensor p = model.forward(tape, train_ds.features[i]);
    switch (cfg.objective) {
      case Objective::kMle:
        return mle_loss(p, k_star[i]);
      case Objective::kRaml:
        return raml_loss(p, targets[i]);
      case Objective::kBiCut: {
        const auto labels = train_ds.lists[i].labels();
        const std::size_t cut = std::min(cfg.bicut.cut_k.value_or(labels.size()), labels.size());
        return bicut_loss(p, labels, cut, cfg.bicut.alpha, r_norm);
      }
      case Objective::kRl:
        if (cfg.rl.sampled) {
          const Mat& pv = p.value();
          std::discrete_distribution<std::size_t> pick(pv.data(), pv.data() + pv.size());
          return rl_sampled_loss(p, rewards[i], cfg.rl, pick(rng) + 1);
        }
        return rl_loss(p, rewards[i], cfg.rl);
    }
    throw ConfigError("unknown objective");
  };
  auto validate = [&](const Partition& pt) {
    Real total = 0;
    for (std::size_t i : pt.val) {
      const auto p = model.probabilities(pt.val_ds->features[i]);
      total += metric_at(pt.val_ds->lists[i], argmax_position(p), cfg.metric);
    }
    return total / static_cast<Real>(pt.val.size());
  };
  model.metadata.metric = cfg.metric;
  model.metadata.objective = std::string(to_string(cfg.objective));
  model.metadata.feature_stats = train_ds.feature_stats;
  return run_training(model.parameters(), train_ds, cfg, part, list_loss, validate, on_epoch);
}

TrainResult train_recall(RecallConstraintModel& model, const Dataset& train_ds, const TrainConfig& cfg,
                         const Dataset* validation, const EpochCallback& on_epoch) {
  cfg.validate();
  require_normalized(train_ds, "training set");
  const Partition part = partition(train_ds, cfg, validation);
  const auto& edges = model.bin_edges();
  auto bins_of = [&](const RankedList& list) {
    std::vector<int> out(list.size());
    const auto labels = list.labels();
    for (std::size_t k = 1; k <= list.size(); ++k) out[k - 1] = recall_bin_of(recall_at(labels, k), edges);
    return out;
  };
  std::vector<std::vector<int>> bins(train_ds.lists.size());
  for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = bins_of(train_ds.lists[i]);

  auto list_loss = [&](Tape& tape, std::size_t i, std::mt19937_64&) -> Tensor {
    return recall_mle_loss(model.forward(tape, train_ds.features[i]), bins[i]);
  };
  auto validate = [&](const Partition& pt) {
    Real total = 0;
    for (std::size_t i : pt.val) {
      const Mat p = model.probabilities(pt.val_ds->features[i]);
      const auto truth = bins_of(pt.val_ds->lists[i]);
      std::size_t hits = 0;
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        Eigen::Index best = 0;
        p.row(r).maxCoeff(&best);
        if (static_cast<int>(best) == truth[static_cast<std::size_t>(r)]) ++hits;
      }
      total += static_cast<Real>(hits) / static_cast<Real>(p.rows());
    }
    return total / static_cast<Real>(pt.val.size());
  };
  model.metadata.metric = cfg.metric;
  model.metadata.objective = "mle";
  model.metadata.feature_stats = train_ds.feature_stats;
  return run_training(model.parameters(), train_ds, cfg, part, list_loss, validate, on_epoch);
}

}  // namespace attncut
