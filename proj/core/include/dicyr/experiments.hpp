/**
 * Copyright 2026 The dicyr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dicyr/config.hpp"
#include "dicyr/data.hpp"
#include "dicyr/evaluation.hpp"
#include "dicyr/training.hpp"

namespace dicyr {

/// Datasets materialised from an ExperimentConfig.
struct ExperimentData {
  Dataset source;
  std::optional<Dataset> target;  ///< unlabeled
  Dataset test;
  std::optional<Dataset> source_test;
};

ExperimentData load_experiment_data(const ExperimentConfig& config);

/// Applies class filter, bias tint and subset limit to a loaded split.
Dataset prepare_split(const DataSpec& spec, const std::filesystem::path& data_dir, uint64_t seed);

struct FitOptions {
  bool resume = false;
  std::function<void(const std::string&)> log;  ///< progress lines; may be empty
};

struct FitResult {
  ModelBundle bundle{nullptr};
  std::filesystem::path output_dir;
  std::filesystem::path metrics_path;
  std::filesystem::path final_checkpoint;
  std::string config_hash;
  int64_t epochs_run = 0;                 ///< epochs executed in this call
  std::map<std::string, double> final_metrics;
};

/// Trains per the config (DiCyR or plain classifier), writing
/// config.effective.json, metrics.jsonl and checkpoints under output_dir.
FitResult fit(const ExperimentConfig& config, const ExperimentData& data, const FitOptions& options = {});
FitResult fit(const ExperimentConfig& config, const FitOptions& options = {});

/// Fresh model for a config, sized from the loaded data; seeds torch first.
ModelBundle build_bundle(const ExperimentConfig& config, const ExperimentData& data);

/// Evaluation names accepted by run_evaluations.
std::vector<std::string> evaluation_names();

/// Evaluations switched on in config.eval.
std::vector<std::string> scheduled_evaluations(const ExperimentConfig& config);

/// config.effective.json of the run a checkpoint belongs to.
std::filesystem::path find_run_config(const std::filesystem::path& checkpoint);

/// Runs the scheduled evaluations of a trained model and writes their
/// outputs under out_dir; returns the scalar results. Throws
/// InvalidArgument for unknown names or ones that do not apply to the mode.
std::map<std::string, double> run_evaluations(const ExperimentConfig& config, ModelBundle& bundle,
                                              const ExperimentData& data, const std::filesystem::path& out_dir,
                                              const std::vector<std::string>& metrics);

/// Outcome of `reproduce`: DiCyR run, optional baseline, the comparison table.
struct ReproduceResult {
  FitResult dicyr;
  std::optional<FitResult> baseline;
  std::map<std::string, double> metrics;
  std::string report;  ///< human-readable comparison with reference numbers
};

std::vector<std::string> experiment_names();
std::filesystem::path default_config_dir();
std::filesystem::path experiment_config_path(const std::string& name, const std::filesystem::path& config_dir);

/// Trains the config (plus its baseline twin when `baseline` is set), then
/// writes report.txt and reproduce.json comparing against the reference
/// numbers registered for config.name.
ReproduceResult run_experiment(const ExperimentConfig& config, const FitOptions& options = {});

/// Runs a shipped experiment config end to end.
ReproduceResult reproduce(const std::string& name, const std::filesystem::path& config_dir,
                          const std::optional<std::filesystem::path>& output_dir = std::nullopt,
                          const std::optional<uint64_t>& seed = std::nullopt, const FitOptions& options = {});

}  // namespace dicyr
