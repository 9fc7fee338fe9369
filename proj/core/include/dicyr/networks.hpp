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

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <torch/torch.h>

#include "dicyr/network_spec.hpp"
#include "dicyr/types.hpp"

namespace dicyr {

/// Channel-first image shape (channels, height, width).
struct ImageShape {
  int64_t channels = 3;
  int64_t height = 28;
  int64_t width = 28;

  bool operator==(const ImageShape&) const = default;
};

/// Feed-forward stack instantiated from a NetworkSpec.
///
/// Layers are registered in order as "0", "1", ... so state dictionaries
/// are stable across builds of the same spec.
class SpecNetworkImpl : public torch::nn::Module {
 public:
  /// input_shape is {features} or {channels, height, width}. output_hw, when
  /// set, is the spatial size a decoder must produce; it drives automatic
  /// reshape targets and "same" padding adjustments.
  SpecNetworkImpl(std::string name,
                  const NetworkSpec& spec,
                  std::vector<int64_t> input_shape,
                  std::optional<std::array<int64_t, 2>> output_hw = std::nullopt,
                  int64_t auto_units = 0);

  /// grl_scale is consumed by Grl layers; final_softmax=false stops before a
  /// trailing softmax and returns logits.
  torch::Tensor forward(torch::Tensor x, double grl_scale = 1.0, bool final_softmax = true);

  const std::vector<int64_t>& output_shape() const { return output_shape_; }
  const std::vector<std::string>& build_notes() const { return notes_; }
  const std::string& network_name() const { return name_; }

 private:
  struct Step;

  std::string name_;
  std::vector<std::shared_ptr<Step>> steps_;
  std::vector<int64_t> output_shape_;
  std::vector<std::string> notes_;
};
TORCH_MODULE(SpecNetwork);

/// Named disjoint parameter groups; each receives its own update rule.
enum class ParamGroup { Encoder, DecoderSource, DecoderTarget, Classifier, TauPredictor, SigmaPredictor };

inline constexpr std::array<ParamGroup, 6> kAllParamGroups = {
    ParamGroup::Encoder,    ParamGroup::DecoderSource, ParamGroup::DecoderTarget,
    ParamGroup::Classifier, ParamGroup::TauPredictor,  ParamGroup::SigmaPredictor};

std::string_view to_string(ParamGroup group);

/// Every sub-network of a model plus the parameter-group partition.
///
/// In single-domain mode there is one style head and one decoder (reported
/// as DecoderSource); DecoderTarget is empty. In UDA mode the style head and
/// the decoder exist once per domain.
class ModelBundleImpl : public torch::nn::Module {
 public:
  ModelBundleImpl(const ArchitectureSpec& spec, ImageShape input_shape, int64_t num_classes, Mode mode);

  Mode mode() const { return mode_; }
  ImageShape input_shape() const { return input_shape_; }
  int64_t num_classes() const { return num_classes_; }
  int64_t tau_dim() const { return tau_dim_; }
  int64_t sigma_dim() const { return sigma_dim_; }

  SpecNetwork trunk{nullptr};
  SpecNetwork tau_head{nullptr};
  std::vector<SpecNetwork> sigma_heads;
  std::vector<SpecNetwork> decoders;
  SpecNetwork classifier{nullptr};
  SpecNetwork tau_predictor{nullptr};
  SpecNetwork sigma_predictor{nullptr};

  /// Index into sigma_heads / decoders; throws InvalidArgument when the
  /// domain tag does not exist in this mode.
  std::size_t domain_index(Domain domain) const;

  std::vector<torch::Tensor> group_parameters(ParamGroup group) const;

  /// Build-time deviations from the declared specs (padding, reshape sizes).
  std::vector<std::string> build_notes() const;

 private:
  Mode mode_;
  ImageShape input_shape_;
  int64_t num_classes_;
  int64_t tau_dim_ = 0;
  int64_t sigma_dim_ = 0;
};
TORCH_MODULE(ModelBundle);

ModelBundle build_model(const ArchitectureSpec& spec, ImageShape input_shape, int64_t num_classes, Mode mode);

/// Task and style embeddings of a batch [B, C, H, W].
LatentPair encode(ModelBundle& bundle, const torch::Tensor& x, Domain domain);

/// Image batch in [0,1] from concat(tau, sigma) through the domain's decoder.
torch::Tensor decode(ModelBundle& bundle, const LatentPair& latent, Domain domain);

/// Class probabilities (rows sum to one).
torch::Tensor classify(ModelBundle& bundle, const torch::Tensor& tau);

/// Pre-softmax classifier scores.
torch::Tensor classifier_logits(ModelBundle& bundle, const torch::Tensor& tau);

struct CrossPrediction {
  torch::Tensor tau_hat;
  torch::Tensor sigma_hat;
};

/// tau_hat = r_tau(grl(sigma)), sigma_hat = r_sigma(grl(tau)), with the GRL
/// scaled by beta_c3. Forward values do not depend on beta_c3.
CrossPrediction cross_predict(ModelBundle& bundle, const LatentPair& latent, double beta_c3);

}  // namespace dicyr
