// SPDX-License-Identifier: Apache-2.0
//
// Training loop, macro-averaged evaluation and the experiment grids
// (normalization x architecture ablation, baseline comparison, noise sweep).
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "emitter/checkpoint.hpp"
#include "emitter/model.hpp"
#include "emitter/nn/loss.hpp"
#include "emitter/nn/optim.hpp"
#include "emitter/pulse_sim.hpp"

namespace emitter {

enum class ClassWeighting { median_frequency, uniform };

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  nn::AdamConfig adam{};
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // 0 disables early stopping on the training loss
  bool shuffle = true;
  ClassWeighting weighting = ClassWeighting::median_frequency;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip norm must be >= 0 (0 disables clipping)");
  }

  static TrainConfig from_config(const KeyValueConfig& kv, const std::string& prefix = "train.") {
    return from_config(kv, prefix, TrainConfig{});
  }

  static TrainConfig from_config(const KeyValueConfig& kv, const std::string& prefix, const TrainConfig& base) {
    TrainConfig c = base;
    c.epochs = kv.get_int<std::size_t>(prefix + "epochs", c.epochs);
    c.batch_size = kv.get_int<std::size_t>(prefix + "batch_size", c.batch_size);
    c.adam.learning_rate = kv.get_double(prefix + "learning_rate", c.adam.learning_rate);
    c.adam.beta1 = kv.get_double(prefix + "beta1", c.adam.beta1);
    c.adam.beta2 = kv.get_double(prefix + "beta2", c.adam.beta2);
    c.adam.epsilon = kv.get_double(prefix + "epsilon", c.adam.epsilon);
    c.clip_norm = kv.get_double(prefix + "clip_norm", c.clip_norm);
    c.patience = kv.get_int<std::size_t>(prefix + "patience", c.patience);
    c.shuffle = kv.get_bool(prefix + "shuffle", c.shuffle);
    if (auto v = kv.take(prefix + "class_weights")) {
      if (*v == "median_frequency") c.weighting = ClassWeighting::median_frequency;
      else if (*v == "uniform") c.weighting = ClassWeighting::uniform;
      else throw ConfigError("unknown class weighting '" + *v + "'");
    }
    c.validate();
    return c;
  }
};

// Stable content hash of a dataset, used to record which data fitted what.
inline std::uint64_t dataset_fingerprint(const Dataset& ds) {
  std::ostringstream out;
  write_dataset(ds, out);
  return fnv1a(out.str());
}

inline nn::ClassWeights class_weights_for(const std::vector<std::size_t>& class_counts, ClassWeighting w) {
  if (w == ClassWeighting::uniform) return nn::ClassWeights::uniform(class_counts.size());
  return nn::median_frequency_weights(class_counts);
}

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Trains on pre-normalized sequences, continuing from `state` (empty for a
// fresh run). Epoch e draws its shuffle order and dropout masks from
// (seed, "epoch", e), so an interrupted and resumed run matches an
// uninterrupted one.
inline TrainingState train_normalized(SequenceClassifier& model, const std::vector<NormalizedSequence>& data,
                                      const std::vector<std::size_t>& class_counts, const TrainConfig& cfg,
                                      TrainingState state = {}, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw ConfigError("training set is empty");
  const auto weights = class_weights_for(class_counts, cfg.weighting);
  auto params = model.parameters();
  nn::Adam adam(cfg.adam);
  if (state.optimizer_steps > 0) adam.restore(state.optimizer_steps, state.adam_m, state.adam_v);
  state.seed = cfg.seed;

  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (double l : state.loss_history) best = std::min(best, l);

  std::vector<std::size_t> order(data.size());
  SequenceClassifier::Cache cache;
  for (std::size_t epoch = state.epochs_completed; epoch < cfg.epochs; ++epoch) {
    auto rng = make_rng(cfg.seed, "epoch", epoch);
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const auto end = std::min(order.size(), start + cfg.batch_size);
      std::vector<NormalizedSequence> members;
      members.reserve(end - start);
      for (auto i = start; i < end; ++i) members.push_back(data[order[i]]);
      const auto batch = NormalizedBatch::from(members);
      nn::zero_grads(params);
      const Matrix logits = model.forward(batch, true, &rng, &cache);
      const auto lg = nn::softmax_weighted_cross_entropy(logits, batch.labels, weights);
      model.backward(cache, lg.d_logits);
      const double norm = nn::clip_gradients(params, cfg.clip_norm);
      if (!std::isfinite(lg.loss) || !std::isfinite(norm)) {
        throw RuntimeFailure("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                             std::to_string(batch_no + 1) + " (loss " + format_double(lg.loss) + ", grad norm " +
                             format_double(norm) + ")");
      }
      adam.step(params);
      loss_sum += lg.loss * static_cast<double>(end - start);
      seen += end - start;
    }
    const double mean_loss = loss_sum / static_cast<double>(seen);
    state.loss_history.push_back(mean_loss);
    state.epochs_completed = epoch + 1;
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
    if (mean_loss < best) {
      best = mean_loss;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  state.optimizer_steps = adam.steps();
  state.adam_m = adam.first_moments();
  state.adam_v = adam.second_moments();
  return state;
}

// Normalizes with the model's scheme and `stats` (fitted on train_ds only) and trains.
inline TrainingState train(SequenceClassifier& model, const Dataset& train_ds, const DomainStats& stats,
                           const TrainConfig& cfg, TrainingState state = {}, const EpochCallback& on_epoch = {}) {
  const auto data = normalize_dataset(train_ds, stats, model.config().norm);
  return train_normalized(model, data, train_ds.class_counts(), cfg, std::move(state), on_epoch);
}

struct EvalReport {
  double macro_accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the test set
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
  std::size_t n_test = 0;
  std::map<std::string, std::string> metadata;

  std::size_t num_classes() const { return confusion.size(); }
};

// ACC_c = confusion[c][c] / N_c; M = mean of ACC_c over classes present in `truth`.
inline EvalReport make_report(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                              std::size_t num_classes) {
  if (predicted.size() != truth.size()) throw ConfigError("prediction / label count mismatch");
  EvalReport r;
  r.n_test = truth.size();
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= num_classes || predicted[i] >= num_classes) throw ConfigError("class index out of range");
    ++r.confusion[truth[i]][predicted[i]];
  }
  double sum = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const auto n = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0});
    if (n == 0) {
      r.per_class_accuracy.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double acc = static_cast<double>(r.confusion[c][c]) / static_cast<double>(n);
    r.per_class_accuracy.push_back(acc);
    sum += acc;
    ++present;
  }
  r.macro_accuracy = present ? sum / static_cast<double>(present) : 0.0;
  return r;
}

inline constexpr std::size_t kEvalBatch = 64;

inline std::vector<std::size_t> predict_labels(const SequenceClassifier& model, const Dataset& ds,
                                               const DomainStats& stats) {
  std::vector<std::size_t> out;
  out.reserve(ds.size());
  for (std::size_t start = 0; start < ds.size(); start += kEvalBatch) {
    const auto end = std::min(ds.size(), start + kEvalBatch);
    std::vector<NormalizedSequence> members;
    for (auto i = start; i < end; ++i) members.push_back(normalize_scheme(ds[i], stats, model.config().norm));
    const Matrix logits = model.infer(NormalizedBatch::from(members));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) out.push_back(argmax_lowest(logits.row(r)));
  }
  return out;
}

inline EvalReport evaluate(const SequenceClassifier& model, const DomainStats& stats, const Dataset& test_ds) {
  const auto pred = predict_labels(model, test_ds, stats);
  const auto truth = test_ds.labels();
  auto report = make_report(pred, truth, model.config().num_classes);
  report.metadata["architecture"] = to_string(model.config().architecture);
  report.metadata["normalization"] = to_string(model.config().norm.scheme);
  report.metadata["test_fingerprint"] = std::to_string(dataset_fingerprint(test_ds));
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["macro_accuracy"] = r.macro_accuracy;
  j["n_test"] = r.n_test;
  auto acc = nlohmann::json::array();
  for (double a : r.per_class_accuracy) acc.push_back(std::isnan(a) ? nlohmann::json(nullptr) : nlohmann::json(a));
  j["per_class_accuracy"] = acc;
  j["confusion"] = r.confusion;
  j["metadata"] = r.metadata;
  return j;
}

inline std::string confusion_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "truth\\prediction";
  for (std::size_t c = 0; c < r.num_classes(); ++c) out << ',' << c;
  out << '\n';
  for (std::size_t t = 0; t < r.num_classes(); ++t) {
    out << t;
    for (auto n : r.confusion[t]) out << ',' << n;
    out << '\n';
  }
  return out.str();
}

inline std::string per_class_csv(const EvalReport& r) {
  std::ostringstream out;
  out << "class,n,accuracy\n";
  for (std::size_t c = 0; c < r.num_classes(); ++c) {
    const auto n = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), std::size_t{0});
    out << c << ',' << n << ',' << (std::isnan(r.per_class_accuracy[c]) ? std::string("") : format_double(r.per_class_accuracy[c])) << '\n';
  }
  return out.str();
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const auto k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// ---------------------------------------------------------------------------
// Experiment grids

struct ExperimentCell {
  std::string label;
  ModelConfig model;
};

struct RunResult {
  std::uint64_t seed = 0;
  SequenceClassifier model;
  TrainingState state;
  EvalReport report;
};

struct CellResult {
  ExperimentCell cell;
  std::vector<RunResult> runs;  // one per seed

  std::vector<double> macro_by_seed() const {
    std::vector<double> out;
    for (const auto& r : runs) out.push_back(r.report.macro_accuracy);
    return out;
  }
  double median_macro() const { return median(macro_by_seed()); }

  // The run whose macro accuracy is the (lower) median across seeds.
  const RunResult& median_run() const {
    std::vector<std::size_t> idx(runs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) {
      return runs[a].report.macro_accuracy < runs[b].report.macro_accuracy;
    });
    return runs[idx[(idx.size() - 1) / 2]];
  }
};

struct GridOptions {
  std::size_t seeds = 3;
  std::size_t jobs = 1;
  bool keep_models = true;
};

// Seed index s uses the same derived seed for every cell.
inline std::uint64_t run_seed(std::uint64_t base, std::size_t s) { return derive_seed(base, "run", s); }

// Trains and evaluates every (cell, seed) pair. Work items are independent and
// write to fixed slots, so results do not depend on `jobs`.
inline std::vector<CellResult> run_grid(const std::vector<ExperimentCell>& cells, const Dataset& train_ds,
                                        const Dataset& test_ds, const TrainConfig& train_cfg,
                                        const GridOptions& opt) {
  if (opt.seeds < 1) throw ConfigError("need at least one seed");
  for (const auto& c : cells) c.model.validate();
  const auto stats = fit_domain_stats(train_ds);
  std::vector<CellResult> results(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    results[i].cell = cells[i];
    results[i].runs.resize(opt.seeds);
  }
  const std::size_t items = cells.size() * opt.seeds;
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(items);

  auto worker = [&] {
    for (std::size_t item; (item = next.fetch_add(1)) < items;) {
      const auto ci = item / opt.seeds;
      const auto s = item % opt.seeds;
      try {
        auto& run = results[ci].runs[s];
        run.seed = run_seed(train_cfg.seed, s);
        auto cfg = train_cfg;
        cfg.seed = run.seed;
        run.model = SequenceClassifier::build(cells[ci].model, run.seed);
        run.state = train(run.model, train_ds, stats, cfg);
        run.report = evaluate(run.model, stats, test_ds);
        run.report.metadata["cell"] = cells[ci].label;
        run.report.metadata["seed"] = std::to_string(run.seed);
        run.report.metadata["train_fingerprint"] = std::to_string(dataset_fingerprint(train_ds));
        if (!opt.keep_models) {
          run.model = SequenceClassifier{};
          run.state.adam_m.clear();
          run.state.adam_v.clear();
        }
      } catch (...) {
        errors[item] = std::current_exception();
      }
    }
  };
  const auto n_threads = std::max<std::size_t>(1, std::min(opt.jobs, items));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

// The six normalization x architecture cells, in table order.
inline std::vector<ExperimentCell> ablation_cells(const ModelConfig& base) {
  std::vector<ExperimentCell> cells;
  for (auto scheme : {NormScheme::none, NormScheme::minmax, NormScheme::minmax_perseq}) {
    for (auto arch : {Architecture::joint_lstm, Architecture::attribute_specific_lstm}) {
      auto m = base;
      m.architecture = arch;
      m.norm.scheme = scheme;
      cells.push_back({to_string(scheme) + "/" + to_string(arch), m});
    }
  }
  return cells;
}

// Baselines plus the proposed model (last row).
inline std::vector<ExperimentCell> baseline_cells(const ModelConfig& base) {
  std::vector<ExperimentCell> cells;
  auto gru = base;
  gru.architecture = Architecture::gru_discretized;
  gru.norm.scheme = NormScheme::discretize;
  gru.use_rf = false;
  cells.push_back({"gru_discretized", gru});
  gru.use_rf = true;
  cells.push_back({"gru_discretized+rf", gru});
  auto mlp = base;
  mlp.architecture = Architecture::stats_mlp;
  mlp.norm.scheme = NormScheme::minmax;
  cells.push_back({"stats_mlp/minmax", mlp});
  mlp.norm.scheme = NormScheme::standardize;
  cells.push_back({"stats_mlp/standardize", mlp});
  auto proposed = base;
  proposed.architecture = Architecture::attribute_specific_lstm;
  proposed.norm.scheme = NormScheme::minmax_perseq;
  cells.push_back({"proposed", proposed});
  return cells;
}

inline std::vector<CellResult> run_ablation(const ModelConfig& base, const Dataset& train_ds, const Dataset& test_ds,
                                            const TrainConfig& cfg, const GridOptions& opt) {
  return run_grid(ablation_cells(base), train_ds, test_ds, cfg, opt);
}

inline std::vector<CellResult> run_baselines(const ModelConfig& base, const Dataset& train_ds, const Dataset& test_ds,
                                             const TrainConfig& cfg, const GridOptions& opt) {
  return run_grid(baseline_cells(base), train_ds, test_ds, cfg, opt);
}

// One row per cell: label columns, per-seed macro accuracy, median.
inline std::string grid_csv(const std::vector<CellResult>& results) {
  std::ostringstream out;
  const auto seeds = results.empty() ? 0 : results.front().runs.size();
  out << "method,normalization,architecture";
  for (std::size_t s = 0; s < seeds; ++s) out << ",macro_accuracy_seed" << s;
  out << ",median_macro_accuracy\n";
  for (const auto& r : results) {
    out << r.cell.label << ',' << to_string(r.cell.model.norm.scheme) << ',' << to_string(r.cell.model.architecture);
    for (double m : r.macro_by_seed()) out << ',' << format_double(m);
    out << ',' << format_double(r.median_macro()) << '\n';
  }
  return out.str();
}

struct SweepModel {
  std::string name;
  const SequenceClassifier* model = nullptr;
  DomainStats stats;
};

struct NoiseCurves {
  std::vector<double> fractions;
  std::vector<std::string> names;
  std::vector<std::vector<double>> macro;  // [model][fraction]
};

inline const std::vector<double> kDefaultNoiseFractions{0.0, 0.02, 0.04, 0.06, 0.08, 0.10};

// Test-set-only perturbation: fraction i uses seed (seed, "sweep", i) for every model.
inline NoiseCurves noise_sweep(const std::vector<SweepModel>& models, const Dataset& test_ds,
                               const std::vector<double>& fractions, std::uint64_t seed) {
  NoiseCurves curves;
  curves.fractions = fractions;
  curves.macro.assign(models.size(), {});
  for (const auto& m : models) curves.names.push_back(m.name);
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const auto noisy = add_noise(test_ds, fractions[i], derive_seed(seed, "sweep", i));
    for (std::size_t k = 0; k < models.size(); ++k) {
      curves.macro[k].push_back(evaluate(*models[k].model, models[k].stats, noisy).macro_accuracy);
    }
  }
  return curves;
}

inline std::string curves_csv(const NoiseCurves& c) {
  std::ostringstream out;
  out << "noise_fraction";
  for (const auto& n : c.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < c.fractions.size(); ++i) {
    out << format_double(c.fractions[i]);
    for (const auto& row : c.macro) out << ',' << format_double(row[i]);
    out << '\n';
  }
  return out.str();
}

// Whitespace-separated columns with a commented header, for `plot ... using 1:2`.
inline std::string curves_gnuplot(const NoiseCurves& c) {
  std::ostringstream out;
  out << "# noise_fraction";
  for (const auto& n : c.names) out << ' ' << n;
  out << '\n';
  for (std::size_t i = 0; i < c.fractions.size(); ++i) {
    out << format_fixed(c.fractions[i], 4);
    for (const auto& row : c.macro) out << ' ' << format_fixed(row[i], 6);
    out << '\n';
  }
  return out.str();
}

}  // namespace emitter
