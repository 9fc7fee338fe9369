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
#include <string_view>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace dicyr {

/// Images [N, 3, H, W] float32 in [0,1], channel-first like the networks.
///
/// Grayscale sources are replicated to three channels. labels is [N] int64
/// (undefined for unlabeled splits); factors is [N, F] int64 generative
/// factor codes when the dataset provides them.
struct Dataset {
  std::string name;
  std::string split;
  torch::Tensor images;
  torch::Tensor labels;
  torch::Tensor factors;
  int64_t num_classes = 0;

  int64_t size() const { return images.defined() ? images.size(0) : 0; }
  bool has_labels() const { return labels.defined(); }
  bool has_factors() const { return factors.defined(); }

  /// Rows [begin, begin + count) as a view-free copy.
  Dataset slice(int64_t begin, int64_t count) const;
  /// Rows at the given indices.
  Dataset select(const torch::Tensor& indices) const;
  /// Drops the labels (target-domain training view).
  Dataset unlabeled() const;
};

std::vector<std::string> dataset_names();

/// Cache root: $DICYR_DATA when set, otherwise ./data.
std::filesystem::path default_data_dir();

/// Loads a split from `<data_dir>/processed`, building it from the staged
/// IDX files under `<data_dir>/raw/<name>/` on first use.
///
/// Processed arrays carry a manifest (count, shape, crc32) that is verified
/// on every load. Throws FetchError naming the expected file when the raw
/// files are absent.
Dataset load_dataset(std::string_view name, std::string_view split,
                     const std::filesystem::path& data_dir = default_data_dir());

/// Keeps the samples whose label is in `classes`, preserving order.
Dataset filter_classes(const Dataset& ds, const std::vector<int64_t>& classes);

/// Class-to-color tint used by the biased colored-MNIST generator.
struct BiasSpec {
  double intensity_low = 0.5;
  double intensity_high = 1.0;
  bool invert = false;
};

/// Tints a {0,1}-labelled digit set: ones yellow (R=G=k*p, B=0), zeros blue
/// (B=k*p), k ~ U(intensity_low, intensity_high) per image. invert swaps the
/// two colors. Throws InvalidArgument for any other label.
Dataset make_biased_mnist(const Dataset& base, const BiasSpec& spec, uint64_t seed);

/// Shuffled mini-batch index lists; the order is a pure function of
/// (seed, epoch). The trailing partial batch is dropped.
class BatchIterator {
 public:
  BatchIterator(int64_t dataset_size, int64_t batch_size, uint64_t seed, int64_t epoch);

  int64_t num_batches() const { return static_cast<int64_t>(batches_.size()); }
  const torch::Tensor& batch(int64_t i) const { return batches_.at(static_cast<std::size_t>(i)); }
  const std::vector<torch::Tensor>& batches() const { return batches_; }

 private:
  std::vector<torch::Tensor> batches_;
};

/// Permutation of 0..n-1 drawn from a generator seeded with (seed, stream).
torch::Tensor seeded_permutation(int64_t n, uint64_t seed, uint64_t stream);

/// Returns (x, x') with x'_i = x_{(i+1) mod B}.
std::pair<torch::Tensor, torch::Tensor> pair_for_cycle(const torch::Tensor& batch);

/// CRC-32 (IEEE) of a byte range.
uint32_t crc32_bytes(const void* data, std::size_t size);

}  // namespace dicyr
