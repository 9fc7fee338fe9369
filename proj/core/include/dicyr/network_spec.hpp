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
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace dicyr {

enum class Activation { Linear, Relu, Sigmoid, Softmax };
enum class NormKind { Batch, Instance, None };

std::string_view to_string(Activation activation);
std::string_view to_string(NormKind kind);
Activation activation_from_string(std::string_view text);
NormKind norm_kind_from_string(std::string_view text);

namespace layers {

/// padding < 0 means "same" (output spatial size equals input size).
struct Conv {
  int64_t filters = 0;
  int64_t kernel = 3;
  int64_t stride = 1;
  int64_t padding = 0;
  Activation activation = Activation::Relu;
};
struct MaxPool {
  int64_t size = 2;
  int64_t stride = 2;
};
struct Upsample {
  int64_t factor = 2;
};
/// units == 0 is resolved at build time (class count for classifiers,
/// embedding width for cross-predictors).
struct Dense {
  int64_t units = 0;
  Activation activation = Activation::Relu;
};
struct Dropout {
  double p = 0.5;
};
struct Normalization {
  NormKind kind = NormKind::Batch;
};
struct Flatten {};
/// Empty shape: chosen at build time from the decoder's target resolution.
struct Reshape {
  std::vector<int64_t> shape;
};
/// Gradient reversal with the scale supplied at forward time.
struct Grl {};
/// Scales each row of a [batch, features] input to unit Euclidean norm.
struct UnitNorm {};

}  // namespace layers

using LayerSpec = std::variant<layers::Conv,
                               layers::MaxPool,
                               layers::Upsample,
                               layers::Dense,
                               layers::Dropout,
                               layers::Normalization,
                               layers::Flatten,
                               layers::Reshape,
                               layers::Grl,
                               layers::UnitNorm>;

std::string describe(const LayerSpec& layer);

/// Ordered list of layers for one sub-network.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
};

/// Layer lists for every sub-network of a model.
///
/// The encoder is trunk followed by one task head and one style head (the
/// style head is instantiated once per domain in UDA mode). The decoder
/// consumes concat(tau, sigma).
struct ArchitectureSpec {
  NetworkSpec trunk;
  NetworkSpec tau_head;
  NetworkSpec sigma_head;
  NetworkSpec decoder;
  NetworkSpec classifier;
  NetworkSpec tau_predictor;
  NetworkSpec sigma_predictor;

  /// Replaces the kind of every Normalization layer.
  void override_normalization(NormKind kind);
};

/// Names of the shipped presets.
std::vector<std::string> preset_names();

/// Looks up a preset; throws InvalidArgument for unknown names.
ArchitectureSpec preset(std::string_view name);

void to_json(nlohmann::json& j, const LayerSpec& layer);
void from_json(const nlohmann::json& j, LayerSpec& layer);
void to_json(nlohmann::json& j, const NetworkSpec& spec);
void from_json(const nlohmann::json& j, NetworkSpec& spec);
void to_json(nlohmann::json& j, const ArchitectureSpec& spec);
void from_json(const nlohmann::json& j, ArchitectureSpec& spec);

}  // namespace dicyr
