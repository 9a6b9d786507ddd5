// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: dataset generation, training, evaluation, the
// normalization/architecture ablation, the baseline comparison and the
// measurement-noise sweep.
//
// Exit status: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "emitter/emitter.hpp"

namespace fs = std::filesystem;
using namespace emitter;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string out_dir = ".";
};

// The file is optional; without one every section takes its defaults.
// `data_classes`, when given, fills model.classes unless the file sets it.
RunConfig load_run_config(const GlobalOptions& g, std::optional<std::size_t> data_classes = {}) {
  KeyValueConfig kv;
  try {
    kv = g.config_path.empty() ? KeyValueConfig::parse_string("") : KeyValueConfig::load(g.config_path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  if (data_classes && !kv.has("model.classes")) kv.set("model.classes", std::to_string(*data_classes));
  return RunConfig::from_config(kv, g.seed);
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out.flush()) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

fs::path out_path(const GlobalOptions& g, const std::string& name) { return fs::path(g.out_dir) / name; }

// --data given: split that file; otherwise simulate from the config.
std::pair<Dataset, Dataset> experiment_data(const RunConfig& rc, const std::string& data_path) {
  if (data_path.empty()) return simulate_and_split(rc);
  return split_dataset(load_dataset(data_path), rc.experiment.train_fraction, rc.split_seed());
}

void print_grid(const std::vector<CellResult>& grid) {
  for (const auto& cell : grid) {
    std::cout << std::left << std::setw(40) << cell.cell.label << " median macro accuracy "
              << format_fixed(cell.median_macro(), 4) << '\n';
  }
}

// ---------------------------------------------------------------------------

struct GenOptions {
  std::string out;
  std::string in;
  double noise = 0.0;
  std::string train_out, test_out;
};

int cmd_gen(const GlobalOptions& g, const GenOptions& o) {
  const auto rc = load_run_config(g);
  Dataset ds = o.in.empty() ? generate_dataset(rc.require_sim()) : load_dataset(o.in);
  if (o.noise > 0.0) ds = add_noise(ds, o.noise, derive_seed(rc.seed, "gen-noise"));
  save_dataset(ds, o.out);
  std::cout << "wrote " << ds.size() << " sequences (" << ds.num_classes() << " classes) to " << o.out << '\n';
  if (!o.train_out.empty() || !o.test_out.empty()) {
    if (o.train_out.empty() || o.test_out.empty()) throw ConfigError("--train-out and --test-out go together");
    const auto [train_ds, test_ds] = split_dataset(ds, rc.experiment.train_fraction, rc.split_seed());
    save_dataset(train_ds, o.train_out);
    save_dataset(test_ds, o.test_out);
    std::cout << "split " << train_ds.size() << " train / " << test_ds.size() << " test\n";
  }
  return 0;
}

struct TrainOptions {
  std::string data, out, resume;
};

int cmd_train(const GlobalOptions& g, const TrainOptions& o) {
  const auto ds = load_dataset(o.data);
  const auto rc = load_run_config(g, ds.num_classes());
  Checkpoint ck;
  if (o.resume.empty()) {
    ck.model = SequenceClassifier::build(rc.model, derive_seed(rc.seed, "init"));
    ck.stats = fit_domain_stats(ds);
  } else {
    ck = load_checkpoint(o.resume);
    if (ck.model.config().num_classes != ds.num_classes()) {
      throw ConfigError("checkpoint has " + std::to_string(ck.model.config().num_classes) + " classes but the data has " +
                        std::to_string(ds.num_classes()));
    }
    std::cout << "resuming after epoch " << ck.state.epochs_completed << '\n';
  }
  ck.state = train(ck.model, ds, ck.stats, rc.train, std::move(ck.state), [](std::size_t epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << format_fixed(loss, 6) << '\n' << std::flush;
  });
  save_checkpoint(ck, o.out);
  std::cout << "saved " << o.out << " (" << ck.model.parameter_count() << " parameters)\n";
  return 0;
}

struct EvalOptions {
  std::string checkpoint, data;
};

int cmd_eval(const GlobalOptions& g, const EvalOptions& o) {
  const auto ck = load_checkpoint(o.checkpoint);
  const auto ds = load_dataset(o.data);
  auto report = evaluate(ck.model, ck.stats, ds);
  report.metadata["checkpoint"] = o.checkpoint;
  write_file(out_path(g, "report.json"), report_to_json(report).dump(2) + "\n");
  write_file(out_path(g, "confusion.csv"), confusion_csv(report));
  write_file(out_path(g, "per_class.csv"), per_class_csv(report));
  std::cout << "macro accuracy " << format_fixed(report.macro_accuracy, 4) << " over " << report.n_test
            << " sequences; reports in " << g.out_dir << '\n';
  return 0;
}

struct GridCommandOptions {
  std::string data;
  bool save_median = false;
};

int cmd_grid(const GlobalOptions& g, const GridCommandOptions& o, bool ablation) {
  auto rc = load_run_config(g);
  const auto [train_ds, test_ds] = experiment_data(rc, o.data);
  if (!o.data.empty()) rc.model.num_classes = train_ds.num_classes();
  const GridOptions opt{rc.experiment.seeds, g.jobs, o.save_median};
  const auto grid = ablation ? run_ablation(rc.model, train_ds, test_ds, rc.train, opt)
                             : run_baselines(rc.model, train_ds, test_ds, rc.train, opt);
  const std::string name = ablation ? "ablation" : "baselines";
  write_file(out_path(g, name + ".csv"), grid_csv(grid));
  print_grid(grid);
  if (o.save_median) {
    const auto stats = fit_domain_stats(train_ds);
    for (const auto& cell : grid) {
      std::string file = cell.cell.label;
      for (auto& ch : file)
        if (ch == '/' || ch == '+') ch = '_';
      const auto& run = cell.median_run();
      save_checkpoint({run.model, stats, run.state}, out_path(g, name + "_" + file + ".ckpt").string());
    }
  }
  std::cout << "wrote " << out_path(g, name + ".csv").string() << '\n';
  return 0;
}

struct SweepOptions {
  std::vector<std::string> checkpoints;
  std::string data;
  std::vector<double> fractions;
};

int cmd_noise_sweep(const GlobalOptions& g, const SweepOptions& o) {
  const auto rc = load_run_config(g);
  const auto test_ds = load_dataset(o.data);
  std::vector<Checkpoint> loaded;
  loaded.reserve(o.checkpoints.size());
  for (const auto& path : o.checkpoints) loaded.push_back(load_checkpoint(path));
  std::vector<SweepModel> models;
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    models.push_back({fs::path(o.checkpoints[i]).stem().string(), &loaded[i].model, loaded[i].stats});
  }
  const auto fractions = o.fractions.empty() ? rc.experiment.noise_fractions : o.fractions;
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 0.5)) throw ConfigError("noise fractions must lie in [0, 0.5]");
  const auto curves = noise_sweep(models, test_ds, fractions, rc.sweep_seed());
  write_file(out_path(g, "noise_curves.csv"), curves_csv(curves));
  write_file(out_path(g, "noise_curves.dat"), curves_gnuplot(curves));
  std::cout << curves_csv(curves);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar emitter classification from pulse descriptor sequences"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may also follow the subcommand
  GlobalOptions g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "Override the configuration's top-level seed");
  app.add_option("--jobs", g.jobs, "Worker threads for experiment grids")->check(CLI::Range(1, 256));
  app.add_option("--out-dir", g.out_dir, "Directory for reports and tables");

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Simulate a dataset (or perturb an existing one)");
  gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();
  gen_cmd->add_option("--in", gen.in, "Perturb this dataset instead of simulating")->check(CLI::ExistingFile);
  gen_cmd->add_option("--noise", gen.noise, "Extra relative Gaussian noise")->check(CLI::Range(0.0, 0.5));
  gen_cmd->add_option("--train-out", gen.train_out, "Also write the stratified training split here");
  gen_cmd->add_option("--test-out", gen.test_out, "Also write the stratified test split here");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--data", tr.data, "Training dataset")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", tr.out, "Checkpoint to write")->required();
  train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint")->check(CLI::ExistingFile);

  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--data", ev.data, "Test dataset")->required()->check(CLI::ExistingFile);

  GridCommandOptions abl, base;
  auto* ablate_cmd = app.add_subcommand("ablate", "Normalization x architecture ablation grid");
  ablate_cmd->add_option("--data", abl.data, "Dataset to split (default: simulate from the config)")
      ->check(CLI::ExistingFile);
  ablate_cmd->add_flag("--save-median", abl.save_median, "Write each cell's median-run checkpoint");
  auto* base_cmd = app.add_subcommand("baselines", "Baseline methods versus the proposed model");
  base_cmd->add_option("--data", base.data, "Dataset to split (default: simulate from the config)")
      ->check(CLI::ExistingFile);
  base_cmd->add_flag("--save-median", base.save_median, "Write each cell's median-run checkpoint");

  SweepOptions sw;
  auto* sweep_cmd = app.add_subcommand("noise-sweep", "Macro accuracy versus test-time measurement noise");
  sweep_cmd->add_option("--checkpoint", sw.checkpoints, "Checkpoint (repeatable)")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--data", sw.data, "Clean test dataset")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--fractions", sw.fractions, "Noise fractions (default: experiment.noise_fractions)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen_cmd) return cmd_gen(g, gen);
    if (*train_cmd) return cmd_train(g, tr);
    if (*eval_cmd) return cmd_eval(g, ev);
    if (*ablate_cmd) return cmd_grid(g, abl, true);
    if (*base_cmd) return cmd_grid(g, base, false);
    if (*sweep_cmd) return cmd_noise_sweep(g, sw);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
