#include "pgc/train/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "pgc/errors.hpp"

namespace pgc::train {

namespace {

using nn::Model;
using nn::ModelConfig;

int predict(const Vector& probabilities) {
  Eigen::Index best = 0;
  probabilities.maxCoeff(&best);
  return static_cast<int>(best);
}

void check_split(const Dataset& dataset, const FoldSplit& split) {
  std::vector<char> seen(dataset.size(), 0);
  for (const auto* block : {&split.train, &split.validation, &split.test}) {
    for (std::size_t idx : *block) {
      if (idx >= dataset.size())
        throw ConfigError("split index " + std::to_string(idx) + " out of range");
      if (seen[idx]++) throw ConfigError("split blocks overlap at index " + std::to_string(idx));
    }
  }
  if (split.train.empty() || split.validation.empty() || split.test.empty())
    throw ConfigError("split has an empty train, validation or test block");
  std::set<int> classes;
  for (std::size_t idx : split.train) classes.insert(dataset.graphs[idx].target());
  if (static_cast<int>(classes.size()) != dataset.num_classes) {
    throw ConfigError("training block covers " + std::to_string(classes.size()) + " of " +
                      std::to_string(dataset.num_classes) + " classes");
  }
}

struct Evaluation {
  double accuracy = 0.0;
  double loss = 0.0;
};

Evaluation evaluate(const Dataset& dataset, std::span<const SPTensor> sp, const Model& model,
                    std::span<const std::size_t> indices, Phase phase, const TrainHooks* hooks) {
  Evaluation e;
  std::size_t correct = 0;
  for (std::size_t idx : indices) {
    if (hooks && hooks->on_forward) hooks->on_forward(phase, idx);
    const Graph& g = dataset.graphs[idx];
    const Vector p = nn::model_forward(g, sp[idx], model, false);
    if (predict(p) == g.target()) ++correct;
    e.loss -= std::log(std::max(p[g.target()], 1e-300));
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(indices.size());
  e.loss /= static_cast<double>(indices.size());
  return e;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  std::uint64_t out[1];
  seq.generate(reinterpret_cast<std::uint32_t*>(out), reinterpret_cast<std::uint32_t*>(out + 1));
  return out[0];
}

}  // namespace

std::size_t ExperimentReport::failed_folds() const {
  return static_cast<std::size_t>(
      std::count_if(fold_reports.begin(), fold_reports.end(), [](const auto& f) { return !f.ok(); }));
}

FoldReport train_one_fold(const Dataset& dataset, std::span<const SPTensor> sp,
                          const FoldSplit& split, const ModelConfig& config,
                          const TrainHooks* hooks) {
  const auto started = std::chrono::steady_clock::now();
  nn::validate(config);
  check_split(dataset, split);
  require(sp.size() == dataset.size(), "train_one_fold: one SP tensor per graph required");
  for (const auto& t : sp)
    require(t.r >= config.required_sp_radius(), "train_one_fold: SP tensors too shallow");

  std::vector<std::size_t> node_counts;
  node_counts.reserve(split.train.size());
  for (std::size_t idx : split.train) node_counts.push_back(dataset.graphs[idx].node_count());
  const std::size_t k = nn::resolve_sortpool_k(config, node_counts);

  Model model = Model::build(config, dataset.feature_dim, dataset.num_classes, k);
  nn::AdamState adam = nn::AdamState::zeros_like(model.parameters());
  std::mt19937_64 rng(mix_seed(config.seed, 0x5eedULL));

  FoldReport report;
  report.sortpool_k = k;
  std::vector<nn::Parameter> best_params = model.parameters();
  double best_accuracy = -1.0;

  std::vector<std::size_t> order = split.train;
  std::vector<Matrix> grads = model.zero_gradients();
  nn::ForwardTrace trace;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      for (auto& g : grads) g.setZero();
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t idx = order[b];
        if (hooks && hooks->on_forward) hooks->on_forward(Phase::train, idx);
        const Graph& graph = dataset.graphs[idx];
        nn::model_forward(graph, sp[idx], model, true, &rng, &trace);
        const auto loss = nn::softmax_cross_entropy(trace.logits, graph.target());
        if (!std::isfinite(loss.loss)) {
          throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + " on graph " +
                               std::to_string(idx));
        }
        epoch_loss += loss.loss;
        model.backward(sp[idx], trace, loss.grad, grads);
      }
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& g : grads) g *= scale;
      nn::adam_step(model.parameters(), grads, adam, config.adam);
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    const Evaluation val = evaluate(dataset, sp, model, split.validation, Phase::validation, hooks);
    report.validation_loss.push_back(val.loss);
    report.validation_accuracy.push_back(val.accuracy);
    if (val.accuracy > best_accuracy) {
      best_accuracy = val.accuracy;
      report.best_epoch = epoch;
      best_params = model.parameters();
    }
    if (hooks && hooks->on_epoch) hooks->on_epoch(epoch, report.train_loss.back(), val.accuracy);
  }
  model.parameters() = std::move(best_params);

  report.test_accuracy = evaluate(dataset, sp, model, split.test, Phase::test, hooks).accuracy;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

FoldReport train_one_fold(const Dataset& dataset, const FoldSplit& split,
                          const ModelConfig& config, const TrainHooks* hooks) {
  const auto sp = compute_sp_tensors(dataset.graphs, config.required_sp_radius());
  return train_one_fold(dataset, sp, split, config, hooks);
}

ExperimentReport run_experiment(const Dataset& dataset, const ModelConfig& config,
                                const ExperimentOptions& options) {
  nn::validate(config);
  if (options.repeats < 1) throw ConfigError("repeats must be >= 1");
  if (options.jobs < 1) throw ConfigError("jobs must be >= 1");

  const auto sp = compute_sp_tensors(dataset.graphs, config.required_sp_radius());

  struct Task {
    int repeat;
    int fold;
    FoldSplit split;
  };
  std::vector<Task> tasks;
  for (int rep = 0; rep < options.repeats; ++rep) {
    auto splits = stratified_folds(dataset, options.folds, config.seed + static_cast<std::uint64_t>(rep));
    for (int f = 0; f < options.folds; ++f)
      tasks.push_back({rep, f, std::move(splits[static_cast<std::size_t>(f)])});
  }

  ExperimentReport report;
  report.dataset = dataset.name;
  report.config = config;
  report.folds = options.folds;
  report.repeats = options.repeats;
  report.fold_reports.resize(tasks.size());

  std::mutex done_mutex;
  auto run_task = [&](std::size_t i) {
    const Task& task = tasks[i];
    ModelConfig fold_config = config;
    fold_config.seed = mix_seed(config.seed + static_cast<std::uint64_t>(task.repeat),
                                static_cast<std::uint64_t>(task.fold));
    FoldReport fr;
    try {
      fr = train_one_fold(dataset, sp, task.split, fold_config, options.hooks);
    } catch (const NumericalError& e) {
      fr.error = e.what();
    } catch (const ConfigError& e) {
      fr.error = e.what();
    }
    fr.fold_id = task.fold;
    fr.repeat_id = task.repeat;
    if (!fr.ok()) spdlog::warn("repeat {} fold {} failed: {}", task.repeat, task.fold, fr.error);
    report.fold_reports[i] = std::move(fr);
    if (options.hooks && options.hooks->on_fold_done) {
      std::lock_guard lock(done_mutex);
      options.hooks->on_fold_done(report.fold_reports[i]);
    }
  };

  if (options.jobs == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), tasks.size());
    for (std::size_t w = 0; w < n; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) run_task(i);
      });
    }
  }
  aggregate(report);
  return report;
}

void aggregate(ExperimentReport& report) {
  std::vector<double> acc;
  for (const auto& f : report.fold_reports)
    if (f.ok()) acc.push_back(f.test_accuracy);
  report.mean_accuracy = 0.0;
  report.std_accuracy = 0.0;
  if (acc.empty()) return;
  const double n = static_cast<double>(acc.size());
  report.mean_accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / n;
  if (acc.size() > 1) {
    double ss = 0.0;
    for (double a : acc) ss += (a - report.mean_accuracy) * (a - report.mean_accuracy);
    report.std_accuracy = std::sqrt(ss / (n - 1.0));
  }
}

std::string format_mean_std(double mean, double std) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << 100.0 * mean << " ± " << 100.0 * std;
  return out.str();
}

std::string format_summary(const ExperimentReport& report) {
  std::ostringstream out;
  const std::size_t ok = report.fold_reports.size() - report.failed_folds();
  out << "dataset: " << report.dataset << '\n';
  out << "mode: " << nn::to_string(report.config.mode) << '\n';
  out << "r: " << report.config.r << '\n';
  out << "folds: " << report.folds << " x " << report.repeats << " repeats (" << ok
      << " completed, " << report.failed_folds() << " failed)\n";
  out << "epochs: " << report.config.epochs << ", batch size: " << report.config.batch_size
      << ", step size: " << report.config.adam.step_size << '\n';
  out << "accuracy: " << format_mean_std(report.mean_accuracy, report.std_accuracy) << '\n';
  for (const auto& f : report.fold_reports)
    if (!f.ok()) out << "failed: repeat " << f.repeat_id << " fold " << f.fold_id << ": " << f.error << '\n';
  return out.str();
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  if (report.fold_reports.size() == report.failed_folds())
    throw ConfigError("refusing to write a report without any completed fold");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream csv(out_dir / "folds.csv");
  std::ofstream summary(out_dir / "summary.txt");
  if (!csv || !summary) throw DataError("cannot write report files under " + out_dir.string());

  csv << "dataset,mode,r,fold,repeat,accuracy,best_epoch,seconds\n";
  csv << std::setprecision(17);
  const std::string mode = nn::to_string(report.config.mode);
  for (const auto& f : report.fold_reports) {
    if (!f.ok()) continue;
    csv << report.dataset << ',' << mode << ',' << report.config.r << ',' << f.fold_id << ','
        << f.repeat_id << ',' << f.test_accuracy << ',' << f.best_epoch << ','
        << f.wall_time_seconds << '\n';
  }
  summary << format_summary(report);
  if (!csv || !summary) throw DataError("failed writing report files under " + out_dir.string());
}

std::vector<FoldRow> read_folds_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<FoldRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8)
      throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": expected 8 columns");
    try {
      rows.push_back({cells[0], cells[1], std::stoi(cells[2]), std::stoi(cells[3]), std::stoi(cells[4]),
                      std::stod(cells[5]), std::stoi(cells[6]), std::stod(cells[7])});
    } catch (const std::logic_error&) {
      throw DataError(path.filename().string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return rows;
}

}  // namespace pgc::train
