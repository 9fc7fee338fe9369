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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dicyr/data.hpp"
#include "dicyr/evaluation.hpp"
#include "dicyr/losses.hpp"
#include "dicyr/network_spec.hpp"
#include "dicyr/training.hpp"
#include "dicyr/types.hpp"

namespace dicyr {

/// Where one split of training or evaluation data comes from.
struct DataSpec {
  std::string dataset;
  std::string split = "train";
  std::vector<int64_t> classes;  ///< empty keeps every class
  std::optional<BiasSpec> bias;  ///< colored-MNIST tint (classes must be {0,1})
  int64_t limit = 0;             ///< >0 keeps a seeded random subset of that size
};

/// Post-training evaluation switches.
struct EvalSpec {
  bool probes = false;
  bool retrieval = false;
  bool swap_grid = false;
  bool embeddings = false;
  int64_t probe_limit = 0;       ///< >0 subsamples probe train/test sets
  int64_t retrieval_corpus = 1000;
  int64_t retrieval_queries = 100;
  int64_t retrieval_k = 5;
  ProbeSpec probe;
};

/// Complete description of one experiment.
struct ExperimentConfig {
  std::string name = "experiment";
  Mode mode = Mode::Single;
  DataSpec source;                  ///< labelled training data
  std::optional<DataSpec> target;   ///< unlabelled training data (UDA)
  DataSpec test;                    ///< labelled evaluation data (target domain in UDA)
  std::optional<DataSpec> source_test;

  std::string preset = "desk_digits";
  std::optional<ArchitectureSpec> architecture;  ///< overrides the preset when set
  std::optional<NormKind> normalization;         ///< replaces every normalization layer

  LossWeights weights;
  OptimizerSchedule optimizer;
  CrossDomainVariant variant = CrossDomainVariant::TaskOriented;

  int64_t batch_size = 64;
  int64_t epochs = 50;
  uint64_t seed = 0;
  std::string output_dir = "runs/experiment";
  std::string data_dir;  ///< empty: $DICYR_DATA or ./data
  int64_t eval_every = 1;
  int64_t checkpoint_every = 10;

  /// Also train the plain classifier (encoder + classifier on the label
  /// loss only) with the same data and seed, under <output_dir>/baseline.
  bool baseline = false;
  /// Train only the plain classifier in this run.
  bool classifier_only = false;

  EvalSpec eval;

  /// Architecture after preset resolution and normalization override.
  ArchitectureSpec resolved_architecture() const;
  std::filesystem::path resolved_data_dir() const;
};

/// Parses a config; unknown keys and type errors raise ConfigError with the
/// JSON path of the offending entry (e.g. "weights.beta_c3.end").
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config (architecture expanded) in the same schema.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Defaults for a mode: single-domain or UDA loss weights.
ExperimentConfig default_config(Mode mode);

/// Hex CRC-32 of everything that determines parameter shapes.
std::string architecture_hash(const ExperimentConfig& config, ImageShape shape, int64_t num_classes);

}  // namespace dicyr
