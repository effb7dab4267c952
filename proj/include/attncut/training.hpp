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

#ifndef ATTNCUT_TRAINING_HPP_
#define ATTNCUT_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "attncut/data_model.hpp"
#include "attncut/model.hpp"
#include "attncut/objectives.hpp"

namespace attncut {

struct TrainConfig {
  std::size_t batch_size = 20;
  int epochs = 50;
  Real learning_rate = 3e-5;
  std::uint64_t seed = 0;
  Objective objective = Objective::kRaml;
  /// Epochs without a validation improvement before stopping; 0 disables.
  int early_stop_patience = 5;
  MetricName metric = MetricName::kF1;
  RamlConfig raml;
  BiCutLossConfig bicut;
  RlConfig rl;
  /// Share of the training lists held out for early stopping when no
  /// validation set is passed. 0 validates on the training lists.
  Real validation_fraction = 0.1;

  /// Throws ConfigError listing every problem at once.
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  Real train_loss = 0;
  Real val_metric = 0;
  long long wall_ms = 0;
};

struct TrainResult {
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  Real best_val_metric = 0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam on the configured objective. Batch loss is the mean over
/// its lists. The parameters of the best validation epoch are restored at
/// the end. Both datasets must be normalized.
TrainResult train(AttnCutModel& model, const Dataset& train_ds, const TrainConfig& cfg,
                  const Dataset* validation = nullptr, const EpochCallback& on_epoch = {});

/// Trains the recall-bin classifier with per-position maximum likelihood.
/// The validation metric is the mean per-position bin accuracy.
TrainResult train_recall(RecallConstraintModel& model, const Dataset& train_ds, const TrainConfig& cfg,
                         const Dataset* validation = nullptr, const EpochCallback& on_epoch = {});

/// Mean metric at the argmax cut over the lists of `ds`.
Real mean_argmax_metric(const AttnCutModel& model, const Dataset& ds, MetricName metric);

/// One JSON object per epoch: {epoch, train_loss, val_metric, wall_ms}.
void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log);

/// Fraction of relevant documents over all lists.
Real relevant_fraction(const Dataset& ds);

}  // namespace attncut

#endif  // ATTNCUT_TRAINING_HPP_
