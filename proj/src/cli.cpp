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

#include "attncut/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "attncut/dataset_io.hpp"
#include "attncut/errors.hpp"
#include "attncut/ingestion.hpp"
#include "attncut/metrics.hpp"
#include "attncut/model.hpp"
#include "attncut/stats.hpp"
#include "attncut/training.hpp"
#include "attncut/truncation.hpp"
#include "json.hpp"

namespace attncut {
namespace {

namespace fs = std::filesystem;

struct PrepareArgs {
  bool synthetic = false;
  SyntheticConfig synth;
  std::string run_path;
  std::string qrels_path;
  std::string doc_stats_path;
  std::string vector_space = "unspecified";
  std::size_t truncate_to = 300;
  bool drop_unjudged = false;
  bool clamp_negative = false;
  Real train_fraction = 0.8;
  std::optional<std::uint64_t> split_seed;
  std::string out_dir;
};

struct TrainArgs {
  std::string train_path;
  std::string validation_path;
  std::string out_path;
  std::string log_path;
  bool recall = false;
  int bins = 5;
  std::string objective = "raml";
  std::string metric = "f1";
  std::string attention_scale = "model";
  TrainConfig cfg;
  std::optional<Real> bicut_r;
  std::optional<std::size_t> bicut_cut;
  int hidden = 128;
  int layers = 2;
  int heads = 4;
  std::optional<int> mlp_hidden;
};

struct EvaluateArgs {
  std::string test_path;
  std::string train_path;
  std::string checkpoint;
  std::string mle_checkpoint;
  std::string bi_checkpoint;
  std::string rl_checkpoint;
  std::string recall_checkpoint;
  std::vector<std::size_t> fixed_k{5, 10, 50};
  std::vector<Real> sigmas{0.0, 0.3, 0.5, 0.7};
  std::string fallback = "full_list";
  std::optional<std::string> metric;
  std::size_t hist_width = 10;
  std::string out_dir;
};

struct TruncateArgs {
  std::string dataset_path;
  std::string checkpoint;
  std::string recall_checkpoint;
  std::optional<Real> sigma;
  std::string fallback = "full_list";
  std::string out_path;
};

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string fmt(Real v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

nlohmann::ordered_json stats_json(const FeatureStats& s) {
  nlohmann::ordered_json j;
  j["layout"] = default_feature_layout();
  j["mean"] = std::vector<Real>(s.mean.data(), s.mean.data() + s.mean.size());
  j["std"] = std::vector<Real>(s.stddev.data(), s.stddev.data() + s.stddev.size());
  return j;
}

// Normalizes any split with the statistics the model was trained on,
// falling back to the statistics stored in the dataset.
Dataset normalize_for(Dataset ds, const ModelMetadata& meta, const std::string& what) {
  if (meta.layout != default_feature_layout()) {
    throw DataError("feature layout of checkpoint " + what + " does not match the dataset layout");
  }
  const std::optional<FeatureStats> stats = meta.feature_stats ? meta.feature_stats : ds.feature_stats;
  if (!stats) throw ConfigError("no normalization statistics in checkpoint " + what + " or dataset");
  if (ds.lists.empty()) throw ConfigError("no lists");
  ds.features.clear();
  for (const auto& l : ds.lists) ds.features.push_back(normalize_matrix(raw_feature_matrix(l), *stats));
  return ds;
}

AttnCutModel load_metric_model(const std::string& path) {
  const std::string kind = checkpoint_kind(path);
  if (kind != "attncut") throw CheckpointFormatError(path + " holds a '" + kind + "' model, expected attncut");
  return load_attncut_checkpoint(path);
}

RecallConstraintModel load_recall_model(const std::string& path) {
  const std::string kind = checkpoint_kind(path);
  if (kind != "recall") throw CheckpointFormatError(path + " holds a '" + kind + "' model, expected recall");
  return load_recall_checkpoint(path);
}

// ---------------------------------------------------------------- prepare

void add_prepare(CLI::App& app, PrepareArgs& a) {
  auto* synth = app.add_flag("--synthetic", a.synthetic, "Generate a synthetic dataset");
  app.add_option("--run", a.run_path, "TREC run file")->check(CLI::ExistingFile)->excludes(synth);
  app.add_option("--qrels", a.qrels_path, "TREC qrels file")->check(CLI::ExistingFile)->excludes(synth);
  app.add_option("--doc-stats", a.doc_stats_path, "JSONL per-document statistics")
      ->check(CLI::ExistingFile)
      ->excludes(synth);
  app.add_option("--vector-space", a.vector_space, "Name of the space the document vectors live in");
  app.add_option("--truncate-to", a.truncate_to, "Keep the top N documents per query")->check(CLI::PositiveNumber);
  app.add_flag("--drop-unjudged", a.drop_unjudged, "Drop queries without judgments");
  app.add_flag("--clamp-negative", a.clamp_negative, "Map negative grades to 0");
  app.add_option("--n-queries", a.synth.n_queries, "Synthetic query count");
  app.add_option("--list-length", a.synth.list_length, "Synthetic list length");
  app.add_option("--relevant-fraction", a.synth.relevant_fraction, "Share of relevant documents per list");
  app.add_option("--relevant-mean", a.synth.relevant_score_mean, "Mean score of relevant documents");
  app.add_option("--relevant-std", a.synth.relevant_score_std, "Score std of relevant documents");
  app.add_option("--nonrelevant-rate", a.synth.nonrelevant_rate, "Exponential rate of non-relevant scores");
  app.add_option("--similarity-scale", a.synth.similarity_gap_scale, "Score gap scale of neighbour similarity");
  app.add_option("--seed", a.synth.seed, "Random seed");
  app.add_option("--train-fraction", a.train_fraction, "Share of queries in the train split");
  app.add_option("--split-seed", a.split_seed, "Seed of the split (defaults to --seed)");
  app.add_option("--out-dir", a.out_dir, "Output directory")->required();
}

int cmd_prepare(const PrepareArgs& a, std::ostream& out) {
  Dataset all;
  if (a.synthetic) {
    a.synth.validate();
    all = generate_synthetic(a.synth);
  } else {
    if (a.run_path.empty() || a.qrels_path.empty() || a.doc_stats_path.empty()) {
      throw ConfigError("prepare needs --synthetic or all of --run, --qrels and --doc-stats");
    }
    std::ifstream run_in(a.run_path);
    std::ifstream qrels_in(a.qrels_path);
    std::ifstream stats_in(a.doc_stats_path);
    auto with_file = [](const std::string& path, auto&& fn) {
      try {
        return fn();
      } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), 0);
      }
    };
    const auto runs = with_file(a.run_path, [&] { return parse_run_file(run_in); });
    QrelOptions qopt;
    qopt.clamp_negative = a.clamp_negative;
    const auto qrels = with_file(a.qrels_path, [&] { return parse_qrels(qrels_in, qopt); });
    const auto stats = with_file(a.doc_stats_path, [&] { return JsonlDocStats::parse(stats_in, a.vector_space); });
    AssembleOptions opt;
    opt.truncate_to = a.truncate_to;
    opt.drop_unjudged_queries = a.drop_unjudged;
    all = assemble_dataset(runs, qrels, stats, opt);
  }
  if (!(a.train_fraction > 0 && a.train_fraction < 1)) throw ConfigError("--train-fraction must lie in (0,1)");
  auto [train, test] = split_dataset(all, a.train_fraction, a.split_seed.value_or(a.synth.seed));
  train = normalize_features(std::move(train));
  test.feature_stats = train.feature_stats;

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  save_dataset(dir / "train.jsonl", train);
  save_dataset(dir / "test.jsonl", test);
  auto stats_out = open_out(dir / "feature_stats.json");
  stats_out << stats_json(*train.feature_stats).dump(2) << '\n';
  out << "wrote " << train.lists.size() << " train and " << test.lists.size() << " test lists to " << dir.string()
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

void add_train(CLI::App& app, TrainArgs& a) {
  app.add_option("--train", a.train_path, "Train dataset JSONL")->required()->check(CLI::ExistingFile);
  app.add_option("--validation", a.validation_path, "Validation dataset JSONL")->check(CLI::ExistingFile);
  app.add_option("--out", a.out_path, "Checkpoint path")->required();
  app.add_option("--log", a.log_path, "Training log JSONL (default <out>.log.jsonl)");
  app.add_flag("--recall", a.recall, "Train the recall-bin model instead of the cut model");
  app.add_option("--bins", a.bins, "Recall bins");
  app.add_option("--objective", a.objective, "raml | mle | bicut | rl");
  app.add_option("--metric", a.metric, "f1 | dcg");
  app.add_option("--tau", a.cfg.raml.tau, "RAML temperature");
  app.add_option("--gamma", a.cfg.rl.gamma, "RL discount");
  app.add_option("--traces", a.cfg.rl.traces, "RL trace count");
  app.add_flag("--sampled", a.cfg.rl.sampled, "Sampled REINFORCE instead of the exact expectation");
  app.add_option("--alpha", a.cfg.bicut.alpha, "BiCut weight of non-relevant documents");
  app.add_option("--bicut-r", a.bicut_r, "BiCut normalization (default: train relevant fraction)");
  app.add_option("--bicut-cut", a.bicut_cut, "BiCut summation limit (default: list length)");
  app.add_option("--epochs", a.cfg.epochs, "Epochs");
  app.add_option("--batch-size", a.cfg.batch_size, "Lists per mini-batch");
  app.add_option("--lr", a.cfg.learning_rate, "Adam learning rate");
  app.add_option("--patience", a.cfg.early_stop_patience, "Early-stopping patience (0 disables)");
  app.add_option("--validation-fraction", a.cfg.validation_fraction, "Held-out share when no --validation");
  app.add_option("--seed", a.cfg.seed, "Random seed");
  app.add_option("--hidden", a.hidden, "LSTM hidden size per direction");
  app.add_option("--layers", a.layers, "Bi-LSTM layers");
  app.add_option("--heads", a.heads, "Attention heads");
  app.add_option("--mlp-hidden", a.mlp_hidden, "Decision MLP hidden size (default: 2 * hidden)");
  app.add_option("--attention-scale", a.attention_scale, "model | head");
}

int cmd_train(TrainArgs a, std::ostream& out) {
  std::vector<std::string> problems;
  try {
    a.cfg.objective = parse_objective(a.objective);
  } catch (const std::invalid_argument& e) {
    problems.push_back(e.what());
  }
  try {
    a.cfg.metric = parse_metric_name(a.metric);
  } catch (const std::invalid_argument& e) {
    problems.push_back(e.what());
  }
  if (a.attention_scale != "model" && a.attention_scale != "head") {
    problems.push_back("--attention-scale must be model or head");
  }
  if (a.recall && a.bins < 1) problems.push_back("--bins must be >= 1");
  a.cfg.bicut.r_norm = a.bicut_r;
  a.cfg.bicut.cut_k = a.bicut_cut;
  ModelConfig mc;
  mc.hidden_size = a.hidden;
  mc.lstm_layers = a.layers;
  mc.model_dim = 2 * a.hidden;
  mc.heads = a.heads;
  mc.mlp_hidden = a.mlp_hidden.value_or(2 * a.hidden);
  mc.scale_by_model_dim = a.attention_scale == "model";
  mc.init_seed = a.cfg.seed;
  mc.out_dim = a.recall ? a.bins : 1;
  try {
    mc.validate();
  } catch (const std::invalid_argument& e) {
    problems.push_back(e.what());
  }
  try {
    a.cfg.validate();
  } catch (const std::invalid_argument& e) {
    problems.push_back(e.what());
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw ConfigError(msg);
  }

  Dataset train_ds = load_dataset(a.train_path);
  train_ds.split = Split::kTrain;
  train_ds = normalize_features(std::move(train_ds));
  std::optional<Dataset> val;
  if (!a.validation_path.empty()) {
    Dataset v = load_dataset(a.validation_path);
    v.feature_stats = train_ds.feature_stats;
    v.split = Split::kTest;
    val = normalize_features(std::move(v));
  }
  const Dataset* val_ptr = val ? &*val : nullptr;
  const std::string log_path = a.log_path.empty() ? a.out_path + ".log.jsonl" : a.log_path;
  auto log = open_out(log_path);
  auto on_epoch = [&](const EpochRecord& r) {
    write_training_log(log, {r});
    log.flush();
    out << "epoch " << r.epoch << " loss " << fmt(r.train_loss) << " val " << fmt(r.val_metric) << '\n';
  };
  TrainResult result;
  if (a.recall) {
    RecallConstraintModel model(mc, equal_width_bins(a.bins));
    result = train_recall(model, train_ds, a.cfg, val_ptr, on_epoch);
    save_checkpoint(model, a.out_path);
  } else {
    AttnCutModel model(mc);
    result = train(model, train_ds, a.cfg, val_ptr, on_epoch);
    save_checkpoint(model, a.out_path);
  }
  out << "best epoch " << result.best_epoch << " val " << fmt(result.best_val_metric) << "; wrote " << a.out_path
      << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  app.add_option("--test", a.test_path, "Test dataset JSONL")->required()->check(CLI::ExistingFile);
  app.add_option("--train", a.train_path, "Train dataset JSONL (fits greedy-k)")->check(CLI::ExistingFile);
  app.add_option("--checkpoint", a.checkpoint, "AttnCut checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--mle-checkpoint", a.mle_checkpoint, "Checkpoint trained with MLE")->check(CLI::ExistingFile);
  app.add_option("--bi-checkpoint", a.bi_checkpoint, "Checkpoint trained with the BiCut loss")
      ->check(CLI::ExistingFile);
  app.add_option("--rl-checkpoint", a.rl_checkpoint, "Checkpoint trained with the RL loss")->check(CLI::ExistingFile);
  app.add_option("--recall-checkpoint", a.recall_checkpoint, "Recall-bin checkpoint for constrained runs")
      ->check(CLI::ExistingFile);
  app.add_option("--fixed-k", a.fixed_k, "Fixed cut positions")->delimiter(',');
  app.add_option("--sigma", a.sigmas, "Minimal recall grid")->delimiter(',');
  app.add_option("--fallback", a.fallback, "full_list | unconstrained_argmax");
  app.add_option("--metric", a.metric, "f1 | dcg (default: the checkpoint's)");
  app.add_option("--hist-width", a.hist_width, "Positions per histogram bin")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", a.out_dir, "Output directory")->required();
}

struct MethodRun {
  std::string name;
  std::vector<TruncationDecision> decisions;
};

std::string sigma_tag(Real s) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(2) << s;
  return o.str();
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const Fallback fallback = parse_fallback(a.fallback);
  for (Real s : a.sigmas) ConstraintConfig{s, fallback}.validate();
  for (std::size_t k : a.fixed_k) {
    if (k < 1) throw ConfigError("--fixed-k values must be >= 1");
  }
  const AttnCutModel primary = load_metric_model(a.checkpoint);
  const MetricName metric = a.metric ? parse_metric_name(*a.metric) : primary.metadata.metric;
  const Dataset raw_test = load_dataset(a.test_path);
  for (const auto& l : raw_test.lists) {
    if (!l.labeled()) throw DataError("evaluate needs labels; query '" + l.query_id() + "' is unlabeled");
  }
  std::optional<Dataset> train_ds;
  if (!a.train_path.empty()) train_ds = load_dataset(a.train_path);

  auto model_run = [&](const std::string& name, const AttnCutModel& model, const std::string& path) {
    const Dataset test = normalize_for(raw_test, model.metadata, path);
    MethodRun run{name, {}};
    for (std::size_t i = 0; i < test.lists.size(); ++i) {
      auto d = truncate(model, test.lists[i], test.features[i]);
      d.metric_name = metric;
      run.decisions.push_back(std::move(d));
    }
    return run;
  };
  std::vector<MethodRun> model_runs;
  model_runs.push_back(model_run("attncut", primary, a.checkpoint));
  const std::pair<const char*, const std::string*> extra[] = {
      {"attncut-mle", &a.mle_checkpoint}, {"attncut-bi", &a.bi_checkpoint}, {"attncut-rl", &a.rl_checkpoint}};
  for (const auto& [name, path] : extra) {
    if (!path->empty()) model_runs.push_back(model_run(name, load_metric_model(*path), *path));
  }

  // Baselines depend on the metric they are fitted to.
  auto baselines = [&](MetricName m) {
    std::vector<MethodRun> runs;
    MethodRun oracle{"oracle", {}};
    for (const auto& l : raw_test.lists) oracle.decisions.push_back(oracle_cut(l, m));
    runs.push_back(std::move(oracle));
    for (std::size_t k : a.fixed_k) {
      MethodRun fixed{"fixed-k(" + std::to_string(k) + ")", {}};
      for (const auto& l : raw_test.lists) fixed.decisions.push_back(fixed_k_cut(l, k, m));
      runs.push_back(std::move(fixed));
    }
    if (train_ds) {
      const std::size_t k = greedy_k_fit(*train_ds, m);
      MethodRun greedy{"greedy-k", {}};
      for (const auto& l : raw_test.lists) greedy.decisions.push_back(fixed_k_cut(l, k, m));
      runs.push_back(std::move(greedy));
    }
    return runs;
  };

  const fs::path dir(a.out_dir);
  fs::create_directories(dir / "decisions");
  auto report = open_out(dir / "report.csv");
  report << "method,metric,mean,mean_recall,queries,p_value_vs_attncut\n";
  std::vector<MethodRun> primary_runs;
  for (MetricName m : {MetricName::kF1, MetricName::kDcg}) {
    std::vector<MethodRun> runs = model_runs;
    for (auto& r : baselines(m)) runs.push_back(std::move(r));
    const EvaluationSummary reference = evaluate(runs.front().decisions, raw_test, m);
    for (const auto& run : runs) {
      const EvaluationSummary s = evaluate(run.decisions, raw_test, m);
      report << run.name << ',' << to_string(m) << ',' << fmt(s.mean_metric) << ',' << fmt(s.mean_recall) << ','
             << s.per_query_metric.size() << ',';
      if (run.name != "attncut") {
        report << fmt(wilcoxon_signed_rank(s.per_query_metric, reference.per_query_metric).p_value);
      }
      report << '\n';
      if (m == metric) out << std::left << std::setw(16) << run.name << ' ' << to_string(m) << ' ' << fmt(s.mean_metric) << '\n';
    }
    if (m == metric) primary_runs = std::move(runs);
  }

  std::map<std::string, const RankedList*> lists;
  for (const auto& l : raw_test.lists) lists[l.query_id()] = &l;
  for (auto& run : primary_runs) {
    for (auto& d : run.decisions) {
      d.metric_name = metric;
      fill_achieved(d, *lists.at(d.query_id));
    }
    auto f = open_out(dir / "decisions" / (run.name + ".jsonl"));
    write_decisions(f, run.decisions);
    if (run.name == "attncut") {
      auto main_out = open_out(dir / "decisions.jsonl");
      write_decisions(main_out, run.decisions);
    }
  }

  const std::size_t max_len = raw_test.max_list_length();
  auto hist = open_out(dir / "cutoff_histogram.csv");
  hist << "bin_start,bin_end,count,method\n";
  for (const auto& run : primary_runs) {
    std::vector<std::size_t> counts((max_len + a.hist_width - 1) / a.hist_width, 0);
    for (const auto& d : run.decisions) ++counts[(d.cut_position - 1) / a.hist_width];
    for (std::size_t b = 0; b < counts.size(); ++b) {
      hist << b * a.hist_width + 1 << ',' << std::min(max_len, (b + 1) * a.hist_width) << ',' << counts[b] << ','
           << run.name << '\n';
    }
  }

  if (!a.recall_checkpoint.empty()) {
    const RecallConstraintModel recall = load_recall_model(a.recall_checkpoint);
    const Dataset test = normalize_for(raw_test, primary.metadata, a.checkpoint);
    const Dataset recall_test = normalize_for(raw_test, recall.metadata, a.recall_checkpoint);
    auto cons = open_out(dir / "constraint.csv");
    cons << "sigma,metric,mean,mean_recall,meeting_sigma,fallbacks,queries\n";
    for (Real sigma : a.sigmas) {
      const ConstraintConfig cc{sigma, fallback};
      std::vector<TruncationDecision> decisions;
      std::size_t fallbacks = 0;
      for (std::size_t i = 0; i < test.lists.size(); ++i) {
        const auto p = primary.probabilities(test.features[i]);
        const Mat rows = recall.probabilities(recall_test.features[i]);
        const ConstrainedCut c = constrained_cut(p, rows, recall.bin_edges(), cc);
        TruncationDecision d;
        d.query_id = test.lists[i].query_id();
        d.cut_position = c.cut;
        d.metric_name = metric;
        d.constrained = true;
        d.fallback_used = c.fallback_used;
        fallbacks += c.fallback_used ? 1 : 0;
        fill_achieved(d, test.lists[i]);
        decisions.push_back(std::move(d));
      }
      const EvaluationSummary s = evaluate(decisions, raw_test, metric, sigma);
      cons << fmt(sigma) << ',' << to_string(metric) << ',' << fmt(s.mean_metric) << ',' << fmt(s.mean_recall) << ','
           << s.meeting_sigma << ',' << fallbacks << ',' << s.per_query_metric.size() << '\n';
      auto f = open_out(dir / "decisions" / ("constrained_sigma_" + sigma_tag(sigma) + ".jsonl"));
      write_decisions(f, decisions);
      out << "sigma " << sigma_tag(sigma) << ' ' << to_string(metric) << ' ' << fmt(s.mean_metric) << " recall "
          << fmt(s.mean_recall) << '\n';
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- truncate

void add_truncate(CLI::App& app, TruncateArgs& a) {
  app.add_option("--dataset", a.dataset_path, "Dataset JSONL (labels optional)")->required()->check(CLI::ExistingFile);
  app.add_option("--checkpoint", a.checkpoint, "AttnCut checkpoint")->required()->check(CLI::ExistingFile);
  app.add_option("--recall-checkpoint", a.recall_checkpoint, "Recall-bin checkpoint")->check(CLI::ExistingFile);
  app.add_option("--sigma", a.sigma, "Minimal recall; engages the constrained cut");
  app.add_option("--fallback", a.fallback, "full_list | unconstrained_argmax");
  app.add_option("--out", a.out_path, "Decisions JSONL")->required();
}

int cmd_truncate(const TruncateArgs& a, std::ostream& out) {
  if (a.sigma && a.recall_checkpoint.empty()) throw ConfigError("--sigma needs --recall-checkpoint");
  const ConstraintConfig cc{a.sigma.value_or(0), parse_fallback(a.fallback)};
  cc.validate();
  const AttnCutModel model = load_metric_model(a.checkpoint);
  const Dataset ds = normalize_for(load_dataset(a.dataset_path), model.metadata, a.checkpoint);
  std::vector<TruncationDecision> decisions;
  if (a.sigma) {
    const RecallConstraintModel recall = load_recall_model(a.recall_checkpoint);
    const Dataset rds = normalize_for(load_dataset(a.dataset_path), recall.metadata, a.recall_checkpoint);
    for (std::size_t i = 0; i < ds.lists.size(); ++i) {
      auto d = truncate(model, ds.lists[i], ds.features[i]);
      const ConstrainedCut c = constrained_cut(*d.predicted_distribution, recall.probabilities(rds.features[i]),
                                               recall.bin_edges(), cc);
      d.cut_position = c.cut;
      d.constrained = true;
      d.fallback_used = c.fallback_used;
      decisions.push_back(std::move(d));
    }
  } else {
    for (std::size_t i = 0; i < ds.lists.size(); ++i) decisions.push_back(truncate(model, ds.lists[i], ds.features[i]));
  }
  for (std::size_t i = 0; i < decisions.size(); ++i) fill_achieved(decisions[i], ds.lists[i]);
  auto f = open_out(a.out_path);
  write_decisions(f, decisions);
  out << "wrote " << decisions.size() << " decisions to " << a.out_path << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ranked-list truncation with attention-based cut prediction", "attncut"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags override it")->envname("ATTNCUT_CONFIG");
  app.require_subcommand(1);

  PrepareArgs prepare_args;
  TrainArgs train_args;
  EvaluateArgs evaluate_args;
  TruncateArgs truncate_args;
  auto* prepare = app.add_subcommand("prepare", "Build train/test dataset files");
  add_prepare(*prepare, prepare_args);
  auto* train_cmd = app.add_subcommand("train", "Train a cut model or a recall-bin model");
  add_train(*train_cmd, train_args);
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare methods on a labeled test set");
  add_evaluate(*evaluate_cmd, evaluate_args);
  auto* truncate_cmd = app.add_subcommand("truncate", "Write cut decisions for a dataset");
  add_truncate(*truncate_cmd, truncate_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(prepare_args, out);
    if (train_cmd->parsed()) return cmd_train(train_args, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(evaluate_args, out);
    if (truncate_cmd->parsed()) return cmd_truncate(truncate_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace attncut
