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
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "dicyr/types.hpp"

namespace dicyr {

/// Linear ramp from start_value to end_value over ramp_epochs, flat afterwards.
struct ScheduleSpec {
  double start_value = 0.0;
  double end_value = 0.0;
  int64_t ramp_epochs = 1;

  static ScheduleSpec constant(double value) { return {value, value, 1}; }
};

/// start + min(epoch / ramp_epochs, 1) * (end - start).
double schedule_value(const ScheduleSpec& spec, int64_t epoch);

/// Coefficients of the global objective. Defaults are the single-domain values.
struct LossWeights {
  double beta_c2 = 5.0;
  ScheduleSpec beta_c3{0.01, 10.0, 10};
  double beta_c4 = 0.1;
  ScheduleSpec beta_c1t{0.0, 10.0, 10};
  double margin = 1.0;

  static LossWeights single_domain_defaults();
  static LossWeights uda_defaults();
};

/// Per-term scalar values of one step (or an epoch average).
///
/// Terms that were not evaluated stay empty; the single-domain regime uses
/// l_c1/l_c2, the UDA regime l_c1s/l_c1t/l_c2s/l_c2t with l_c1/l_c2 as sums.
struct LossBreakdown {
  std::optional<double> l_c1;
  std::optional<double> l_c1s;
  std::optional<double> l_c1t;
  std::optional<double> l_c2;
  std::optional<double> l_c2s;
  std::optional<double> l_c2t;
  std::optional<double> l_c3;
  std::optional<double> l_r_tau;
  std::optional<double> l_r_sigma;
  std::optional<double> l_c4;
  std::optional<double> total;

  /// Named values in a fixed order, skipping empty terms.
  std::vector<std::pair<std::string, double>> items() const;

  /// Component-wise running mean used for epoch summaries.
  void accumulate(const LossBreakdown& step, int64_t count_before);
};

/// Identity on the forward pass; multiplies the incoming gradient by -scale
/// on the backward pass.
torch::Tensor gradient_reversal(const torch::Tensor& x, double scale);

/// Mean squared error over every pixel of the batch.
torch::Tensor reconstruction_loss(const torch::Tensor& x_hat, const torch::Tensor& x);

/// Mean cross-entropy of softmax(logits) against integer labels.
torch::Tensor task_loss(const torch::Tensor& logits, const torch::Tensor& labels);

/// Batch mean of per-row Euclidean distances between two [batch, ...] tensors.
torch::Tensor mean_row_distance(const torch::Tensor& a, const torch::Tensor& b);

struct OrthogonalityLosses {
  torch::Tensor r_tau;    ///< mean ||tau - tau_hat||
  torch::Tensor r_sigma;  ///< mean ||sigma - sigma_hat||
  torch::Tensor total;    ///< r_tau + r_sigma
};

/// Prediction errors of the two cross-predictors.
OrthogonalityLosses orthogonality_losses(const LatentPair& latent,
                                         const torch::Tensor& tau_hat,
                                         const torch::Tensor& sigma_hat);

/// Cyclic reconstruction loss for a style-swapped sample.
///
/// tau/sigma encode x, sigma_prime encodes the partner x', and
/// (tau_tilde, sigma_tilde) re-encode decode(tau, sigma_prime). The task part
/// pulls tau_tilde to tau; the triplet part uses sigma_tilde as anchor,
/// sigma_prime as positive and sigma as negative with the given margin.
torch::Tensor cyclic_loss(const torch::Tensor& tau,
                          const torch::Tensor& tau_tilde,
                          const torch::Tensor& sigma,
                          const torch::Tensor& sigma_prime,
                          const torch::Tensor& sigma_tilde,
                          double margin);

enum class CrossDomainVariant { Feature, TaskOriented };

std::string_view to_string(CrossDomainVariant variant);
CrossDomainVariant cross_domain_variant_from_string(std::string_view text);

/// Inputs of the cross-domain cycle term.
///
/// "source_cycled" is the task embedding re-extracted from the source sample
/// decoded in target style; "target_cycled" symmetrically. The feature
/// variant needs the four task embeddings; the task-oriented variant needs
/// the classifier probabilities for the target sample and both cycled
/// samples plus the source labels.
struct CrossDomainInputs {
  torch::Tensor tau_source;
  torch::Tensor tau_source_cycled;
  torch::Tensor tau_target;
  torch::Tensor tau_target_cycled;

  torch::Tensor probs_target;
  torch::Tensor probs_source_cycled;
  torch::Tensor probs_target_cycled;
  torch::Tensor labels_source;
};

/// Feature: mean ||tau_s - tau_s~|| + ||tau_t - tau_t~||.
/// Task-oriented: mean ||c(tau_s~) - onehot(y_s)|| + ||c(tau_t) - c(tau_t~)||.
torch::Tensor cross_domain_task_loss(const CrossDomainInputs& inputs, CrossDomainVariant variant);

/// Scalar value of the encoder-facing objective for a breakdown.
///
/// Single: l_c1 + b2 l_c2 - b3 l_c3 + b4 l_c4.
/// UDA: l_c1s + b1t l_c1t + b2 (l_c2s + l_c2t) - b3 l_c3 + b4 l_c4.
/// Missing terms count as zero.
double total_loss(const LossBreakdown& breakdown, const LossWeights& weights, int64_t epoch, Mode mode);

}  // namespace dicyr
