#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pgc/graph.hpp"
#include "pgc/nn/model.hpp"
#include "pgc/sp_tensor.hpp"

namespace pgc::train {

struct FoldReport {
  int fold_id = 0;
  int repeat_id = 0;
  double test_accuracy = 0.0;
  /// 1-based epoch whose parameters were kept; 0 when no training happened.
  int best_epoch = 0;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  std::vector<double> validation_accuracy;
  double wall_time_seconds = 0.0;
  std::size_t sortpool_k = 0;
  /// Non-empty when the fold aborted; such folds carry no accuracy.
  std::string error;

  bool ok() const { return error.empty(); }
};

struct ExperimentReport {
  std::string dataset;
  nn::ModelConfig config;
  int folds = 0;
  int repeats = 0;
  std::vector<FoldReport> fold_reports;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;

  std::size_t failed_folds() const;
};

enum class Phase { train, validation, test };

/// Observation points for tests and progress output.
struct TrainHooks {
  /// Called for every forward pass with the dataset index of the graph.
  std::function<void(Phase, std::size_t)> on_forward;
  std::function<void(const FoldReport&)> on_fold_done;
  std::function<void(int epoch, double train_loss, double val_accuracy)> on_epoch;
};

/// Trains on split.train for config.epochs epochs, tracking validation accuracy
/// after every epoch; the parameters of the best epoch (ties go to the earliest)
/// are restored and the test block is evaluated once.
///
/// `sp` holds one SP tensor per dataset graph with radius at least
/// config.required_sp_radius(). Throws ConfigError for an invalid split, a
/// training block missing a class, or a read-out that does not fit k, and
/// NumericalError on a non-finite loss.
FoldReport train_one_fold(const Dataset& dataset, std::span<const SPTensor> sp,
                          const FoldSplit& split, const nn::ModelConfig& config,
                          const TrainHooks* hooks = nullptr);

FoldReport train_one_fold(const Dataset& dataset, const FoldSplit& split,
                          const nn::ModelConfig& config, const TrainHooks* hooks = nullptr);

struct ExperimentOptions {
  int folds = 10;
  int repeats = 10;
  /// Folds trained concurrently; each worker owns its model.
  int jobs = 1;
  const TrainHooks* hooks = nullptr;
};

/// folds x repeats trainings. Repeat i partitions with seed config.seed + i;
/// fold errors are recorded in the fold's report and the rest still run.
ExperimentReport run_experiment(const Dataset& dataset, const nn::ModelConfig& config,
                                const ExperimentOptions& options);

/// Fills mean/std (sample standard deviation, 0 for a single fold) from the
/// successful folds.
void aggregate(ExperimentReport& report);

/// "85.00 ± 5.00", both in percent.
std::string format_mean_std(double mean, double std);

std::string format_summary(const ExperimentReport& report);

/// Writes <out>/folds.csv (one row per successful fold) and <out>/summary.txt.
/// Refuses a report with no successful fold.
void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

struct FoldRow {
  std::string dataset;
  std::string mode;
  int r = 0;
  int fold = 0;
  int repeat = 0;
  double accuracy = 0.0;
  int best_epoch = 0;
  double seconds = 0.0;
};

std::vector<FoldRow> read_folds_csv(const std::filesystem::path& path);

}  // namespace pgc::train
