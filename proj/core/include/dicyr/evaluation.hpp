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
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "dicyr/data.hpp"
#include "dicyr/networks.hpp"

namespace dicyr {

enum class EmbeddingSpace { Tau, Sigma, Full };

std::string_view to_string(EmbeddingSpace space);
EmbeddingSpace embedding_space_from_string(std::string_view text);

/// Frozen-encoder embeddings of a whole image set, computed in eval mode.
LatentPair compute_embeddings(ModelBundle& bundle, const torch::Tensor& images, Domain domain,
                              int64_t batch_size = 512);

/// Selects tau, sigma or their concatenation.
torch::Tensor select_space(const LatentPair& latent, EmbeddingSpace space);

/// Small classifier trained on frozen embeddings.
struct ProbeSpec {
  int64_t hidden_units = 32;
  int64_t epochs = 20;
  double lr = 1e-3;
  int64_t batch_size = 128;
  EmbeddingSpace input = EmbeddingSpace::Full;
  uint64_t seed = 0;
};

/// Trains a fresh probe on `train` embeddings and returns its accuracy on
/// `test`. factor selects a generative-factor column instead of the label.
/// The global torch RNG state is restored afterwards.
double probe_accuracy(ModelBundle& bundle, const Dataset& train, const Dataset& test, const ProbeSpec& spec,
                      std::optional<int64_t> factor = std::nullopt, Domain domain = Domain::Single);

/// Same protocol on precomputed features (rows aligned with the targets).
double probe_accuracy_on_features(const torch::Tensor& train_x, const torch::Tensor& train_y,
                                  const torch::Tensor& test_x, const torch::Tensor& test_y, int64_t num_classes,
                                  const ProbeSpec& spec);

/// Exact k nearest neighbours under the Euclidean distance.
struct RetrievalReport {
  torch::Tensor indices;    ///< [Q, k] int64 corpus rows, nondecreasing distance
  torch::Tensor distances;  ///< [Q, k] float64
  std::optional<double> label_match_rate;
};

/// Brute-force search in float64. exclude[q] (when given) is a corpus row
/// that query q must not return, typically the query itself; -1 excludes
/// nothing. Ties are broken by the smaller corpus index.
RetrievalReport retrieve(const torch::Tensor& queries, const torch::Tensor& corpus, int64_t k,
                         const torch::Tensor& exclude = {}, const torch::Tensor& query_labels = {},
                         const torch::Tensor& corpus_labels = {});

/// Retrieval in one embedding space of a frozen model. Queries are rows of
/// the corpus and are excluded from their own neighbour lists.
RetrievalReport retrieval(ModelBundle& bundle, const Dataset& corpus, const torch::Tensor& query_rows,
                          EmbeddingSpace space, int64_t k, Domain domain = Domain::Single);

/// [(n+1), (m+1), 3, H, W] grid: column 0 holds the task sources, row 0 the
/// style sources, cell (i, j) decodes (tau_i, sigma_j) with the decoder of
/// the style domain. Cell (0, 0) is white.
torch::Tensor swap_grid(ModelBundle& bundle, const torch::Tensor& task_images, Domain task_domain,
                        const torch::Tensor& style_images, Domain style_domain);

/// Fraction of argmax-correct predictions of c(tau(x)).
double classification_accuracy(ModelBundle& bundle, const Dataset& ds, Domain domain, int64_t batch_size = 512);

/// Accuracy on a labelled target-domain test split (UDA bundles).
double target_accuracy(ModelBundle& bundle, const Dataset& target_test);

struct BiasReport {
  double vanilla_train = 0.0;
  double vanilla_test = 0.0;
  double dicyr_train = 0.0;
  double dicyr_test = 0.0;
};

BiasReport bias_report(ModelBundle& vanilla, ModelBundle& dicyr, const Dataset& biased_train,
                       const Dataset& biased_test);

/// Writes `tau_0..tau_{d-1},label,domain` rows (label -1 when absent) and
/// returns the number of rows.
int64_t export_embeddings(ModelBundle& bundle, const std::vector<std::pair<Dataset, Domain>>& sets,
                          const std::filesystem::path& path);

}  // namespace dicyr
