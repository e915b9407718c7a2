// Command-line driver: train / inspect-dataset / gradcheck.

#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pgc/errors.hpp"
#include "pgc/gradcheck.hpp"
#include "pgc/graph.hpp"
#include "pgc/nn/model.hpp"
#include "pgc/train/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 1, kData = 2, kNumerical = 3 };

pgc::Dataset load_with_features(const std::string& data_dir, const std::string& name) {
  pgc::Dataset ds = pgc::load_tu_dataset(data_dir, name);
  if (!ds.has_node_labels) {
    spdlog::info("{} has no node labels; using one-hot node degree features", name);
    ds = pgc::encode_degree_features(ds);
  }
  return ds;
}

struct TrainArgs {
  std::string dataset;
  std::string data_dir = "data";
  std::string mode = "parametric";
  int r = 2;
  int folds = 10;
  int repeats = 10;
  int epochs = pgc::nn::ModelConfig{}.epochs;
  std::string k = "auto";
  std::uint64_t seed = 1;
  std::string out = "results";
  int batch_size = pgc::nn::ModelConfig{}.batch_size;
  double step_size = pgc::nn::ModelConfig{}.adam.step_size;
  int channels = pgc::nn::ModelConfig{}.channels;
  int jobs = 1;
};

int run_train(const TrainArgs& a) {
  pgc::nn::ModelConfig cfg;
  cfg.mode = pgc::nn::conv_mode_from_string(a.mode);
  cfg.r = a.r;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.batch_size = a.batch_size;
  cfg.adam.step_size = a.step_size;
  cfg.channels = a.channels;
  if (a.k != "auto") {
    try {
      std::size_t used = 0;
      const long v = std::stol(a.k, &used);
      if (used != a.k.size() || v < 1) throw std::invalid_argument(a.k);
      cfg.sortpool_k = static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw pgc::ConfigError("--k expects a positive integer or 'auto', got '" + a.k + "'");
    }
  }
  pgc::nn::validate(cfg);

  const pgc::Dataset ds = load_with_features(a.data_dir, a.dataset);
  spdlog::info("{}: {} graphs, {} classes, feature dim {}", ds.name, ds.size(), ds.num_classes,
               ds.feature_dim);

  pgc::train::TrainHooks hooks;
  hooks.on_fold_done = [](const pgc::train::FoldReport& f) {
    if (f.ok()) {
      spdlog::info("repeat {} fold {}: test acc {:.4f}, best epoch {}, k {}, {:.1f}s", f.repeat_id,
                   f.fold_id, f.test_accuracy, f.best_epoch, f.sortpool_k, f.wall_time_seconds);
    }
  };
  pgc::train::ExperimentOptions opts;
  opts.folds = a.folds;
  opts.repeats = a.repeats;
  opts.jobs = a.jobs;
  opts.hooks = &hooks;
  const auto report = pgc::train::run_experiment(ds, cfg, opts);
  if (report.failed_folds() < report.fold_reports.size()) pgc::train::emit_report(report, a.out);
  std::cout << pgc::train::format_summary(report);
  return report.failed_folds() > 0 ? kNumerical : kOk;
}

int run_inspect(const std::string& data_dir, const std::string& name) {
  const pgc::Dataset ds = pgc::load_tu_dataset(data_dir, name);
  std::cout << pgc::format_stats(ds, pgc::describe(ds));
  return kOk;
}

int run_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : pgc::run_gradient_suite(seed)) {
    std::printf("%-4s %-52s rel.err %.3e (tol %.0e)\n", r.passed() ? "ok" : "FAIL", r.name.c_str(),
                r.relative_error, r.tolerance);
    ok = ok && r.passed();
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric graph convolution toolkit for graph classification"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Nested cross-validation on a benchmark dataset");
  train_cmd->add_option("--dataset", train.dataset, "Dataset name, e.g. MUTAG")->required();
  train_cmd->add_option("--data-dir", train.data_dir, "Directory holding the dataset files");
  train_cmd->add_option("--mode", train.mode, "parametric | dgcnn")
      ->check(CLI::IsMember({"parametric", "dgcnn"}));
  train_cmd->add_option("--r", train.r, "Maximum shortest-path distance");
  train_cmd->add_option("--folds", train.folds, "Cross-validation folds");
  train_cmd->add_option("--repeats", train.repeats, "Repetitions with re-seeded folds");
  train_cmd->add_option("--epochs", train.epochs, "Training epochs per fold");
  train_cmd->add_option("--k", train.k, "SortPooling size or 'auto'");
  train_cmd->add_option("--seed", train.seed, "Base random seed");
  train_cmd->add_option("--out", train.out, "Output directory for folds.csv and summary.txt");
  train_cmd->add_option("--batch-size", train.batch_size, "Graphs per mini-batch");
  train_cmd->add_option("--lr", train.step_size, "Adam step size");
  train_cmd->add_option("--channels", train.channels, "Channels per distance block");
  train_cmd->add_option("--jobs", train.jobs, "Folds trained concurrently");

  std::string inspect_name;
  std::string inspect_dir = "data";
  auto* inspect_cmd = app.add_subcommand("inspect-dataset", "Print dataset statistics");
  inspect_cmd->add_option("--dataset", inspect_name, "Dataset name")->required();
  inspect_cmd->add_option("--data-dir", inspect_dir, "Directory holding the dataset files");

  std::uint64_t gradcheck_seed = 2024;
  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck_cmd->add_option("--seed", gradcheck_seed, "Random seed for the test inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*inspect_cmd) return run_inspect(inspect_dir, inspect_name);
    if (*gradcheck_cmd) return run_gradcheck(gradcheck_seed);
  } catch (const pgc::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const pgc::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const pgc::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  }
  return kConfig;
}
