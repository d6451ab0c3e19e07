#pragma once

// End-to-end orchestration: data generation or ingestion, the surrogate sweep,
// the two-scenario optimization campaign, statistics and the report bundle.
//
// Bundle layout produced by run_pipeline():
//   data/     dataset.csv, dataset.meta.json
//   models/   spec<NN>_<metric>.model, mse_table.csv, training_times.csv,
//             learning_curves/, predictions.csv, best_models.json
//   runs/     traces/<VARIANT>_<scenario>_<seed>.csv, aggregate/, best_layouts.csv
//   compare/  scenario<S>_pvalues.csv, scenario<S>_significance.csv, summary.json
//   report.json
// Every command also writes manifest.<command>.json into its output directory.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "surropt/dataset.hpp"
#include "surropt/de_suite.hpp"
#include "surropt/surrogate.hpp"

namespace surropt::experiment {

inline constexpr const char* kToolVersion = "1.0.0";

struct ExperimentConfig {
  std::vector<int> scenario_ids{1, 2};
  std::vector<de::VariantId> variants{de::kAllVariants.begin(), de::kAllVariants.end()};
  int runs_per_variant = 10;
  de::DEConfig de_config;  // pop 10, CR 0.5, F 0.7, 1000 evaluations
  std::uint64_t base_seed = 2023;
  std::vector<int> surrogate_spec_indices{1, 2, 3};

  std::optional<std::filesystem::path> data_path;  // CSV; synthetic oracle when absent
  int sample_count = 2000;
  dataset::SyntheticOracleConfig oracle;
  double train_fraction = 0.8;
  surrogate::TrainingConfig training;

  std::optional<std::size_t> compare_eval_index;  // final evaluation when absent
  int workers = 0;  // 0: SURROPT_WORKERS or hardware concurrency

  void validate() const;
  int worker_count() const;

  /// Missing keys keep their defaults; unknown keys are rejected.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Seed of one optimization run; distinct for every (variant, scenario, run).
std::uint64_t run_seed(std::uint64_t base_seed, de::VariantId variant, int scenario, int run_index);

/// Files written by a command, hashed into manifest.<command>.json.
class Manifest {
 public:
  Manifest(std::string command, std::filesystem::path root);

  /// Records a file (path relative to the root). Volatile files hold timings and
  /// are expected to differ between otherwise identical runs.
  void add(const std::filesystem::path& file, bool is_volatile = false);
  void set(const std::string& key, nlohmann::json value);
  std::filesystem::path write(double wall_time_seconds) const;

 private:
  std::string command_;
  std::filesystem::path root_;
  nlohmann::ordered_json files_ = nlohmann::ordered_json::array();
  nlohmann::ordered_json extra_ = nlohmann::ordered_json::object();
};

struct GenDataResult {
  std::filesystem::path csv;
  std::filesystem::path metadata;
  std::filesystem::path manifest;
};

GenDataResult gen_data(int count, const dataset::SyntheticOracleConfig& oracle, const std::filesystem::path& out_csv);

struct SpecOutcome {
  int spec_index = 0;
  std::array<std::optional<surrogate::TrainingReport>, dataset::kMetricCount> reports;
  std::array<std::string, dataset::kMetricCount> errors;  // nonempty when training failed
};

struct TrainResult {
  std::vector<SpecOutcome> specs;
  std::array<int, dataset::kMetricCount> best_spec{};  // 0 when no spec trained for the metric
};

TrainResult train(const std::filesystem::path& data_path, const ExperimentConfig& cfg,
                  const std::filesystem::path& out_dir);

/// The best model of every metric, via best_models.json. Throws Error naming a
/// missing metric.
std::array<std::shared_ptr<const surrogate::SurrogateModel>, dataset::kMetricCount> load_best_models(
    const std::filesystem::path& models_dir);

struct OptimizeResult {
  std::size_t trace_files = 0;
};

OptimizeResult optimize(const std::filesystem::path& models_dir, const ExperimentConfig& cfg,
                        const std::filesystem::path& out_dir);

/// Reads a trace CSV (eval_index,best_so_far).
std::vector<double> read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(const std::filesystem::path& path, const std::vector<double>& best_so_far);

struct CompareResult {
  std::vector<int> scenarios;
  nlohmann::ordered_json summary;
};

/// Groups <VARIANT>_<scenario>_<seed>.csv files and writes per-scenario p-value
/// and significance matrices plus summary.json. Throws Error listing every
/// unparsable file.
CompareResult compare(const std::filesystem::path& traces_dir, const std::filesystem::path& out_dir,
                      std::optional<std::size_t> eval_index = std::nullopt);

struct ReportResult {
  std::filesystem::path report;
  std::vector<std::string> warnings;
};

ReportResult report(const std::filesystem::path& bundle_dir);

struct PipelineResult {
  TrainResult training;
  CompareResult comparison;
  ReportResult report;
};

/// gen-data (unless cfg.data_path is set), train, optimize, compare and report
/// into one bundle directory.
PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::filesystem::path& bundle_dir);

}  // namespace surropt::experiment
