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
#include <memory>
#include <string>

#include <torch/torch.h>

#include "dicyr/losses.hpp"
#include "dicyr/networks.hpp"

namespace dicyr {

/// Step learning rate: `initial` before `switch_epoch`, `late` from it on.
struct OptimizerSchedule {
  double initial = 5e-4;
  double late = 5e-5;
  int64_t switch_epoch = 30;

  double lr_at(int64_t epoch) const { return epoch < switch_epoch ? initial : late; }
};

/// Loss terms that may contribute to a step.
///
/// A term also counts as inactive when its weight is zero at the current
/// epoch, so a zero beta_c3 freezes the cross-predictors as well.
struct ActiveTerms {
  bool c1 = true;
  bool c2s = true;  ///< single-domain reconstruction, or the source one in UDA
  bool c2t = true;
  bool c3 = true;
  bool c4 = true;
  bool c1t = true;

  static ActiveTerms all() { return {}; }
  static ActiveTerms none() { return {false, false, false, false, false, false}; }
  /// Plain supervised classifier: encoder and classifier on the label loss.
  static ActiveTerms classifier_only() { return {true, false, false, false, false, false}; }
};

/// Owns a model bundle and its Adam optimizer (one parameter group per
/// ParamGroup) and applies routed update steps.
class Trainer {
 public:
  Trainer(ModelBundle bundle, LossWeights weights, OptimizerSchedule schedule,
          CrossDomainVariant variant = CrossDomainVariant::TaskOriented);

  /// One update on a labelled batch (single-domain mode).
  LossBreakdown step_single(const torch::Tensor& x, const torch::Tensor& y, int64_t epoch,
                            const ActiveTerms& terms = ActiveTerms::all());

  /// One update on a labelled source batch and an unlabelled target batch
  /// of equal size (UDA mode).
  LossBreakdown step_uda(const torch::Tensor& xs, const torch::Tensor& ys, const torch::Tensor& xt,
                         int64_t epoch, const ActiveTerms& terms = ActiveTerms::all());

  /// Sets the optimizer learning rate for the given epoch.
  void apply_lr(int64_t epoch);

  ModelBundle& bundle() { return bundle_; }
  torch::optim::Adam& optimizer() { return *optimizer_; }
  const LossWeights& weights() const { return weights_; }
  const OptimizerSchedule& schedule() const { return schedule_; }
  CrossDomainVariant variant() const { return variant_; }

 private:
  void check_finite(const LossBreakdown& breakdown) const;

  ModelBundle bundle_;
  LossWeights weights_;
  OptimizerSchedule schedule_;
  CrossDomainVariant variant_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
};

LossBreakdown train_step_single(Trainer& trainer, const torch::Tensor& x, const torch::Tensor& y,
                                int64_t epoch, const ActiveTerms& terms = ActiveTerms::all());

LossBreakdown train_step_uda(Trainer& trainer, const torch::Tensor& xs, const torch::Tensor& ys,
                             const torch::Tensor& xt, int64_t epoch,
                             const ActiveTerms& terms = ActiveTerms::all());

/// Contents of a checkpoint besides the module and optimizer tensors.
struct CheckpointMeta {
  std::string config_hash;
  int64_t epoch = 0;  ///< number of completed epochs
  uint64_t seed = 0;
  std::string metrics_json;  ///< last epoch's record, for inspection
};

/// Writes `<path>` (torch archive) and `<path>.json` (meta sidecar).
void save_checkpoint(Trainer& trainer, const CheckpointMeta& meta, const std::filesystem::path& path);

/// Reads the sidecar only.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Restores parameters, buffers and optimizer state into `trainer`. Throws
/// IncompatibleCheckpoint when the stored hash differs from expected_hash.
CheckpointMeta load_checkpoint(Trainer& trainer, const std::filesystem::path& path,
                               const std::string& expected_hash);

/// Restores parameters and buffers only (evaluation use).
CheckpointMeta load_checkpoint(ModelBundle& bundle, const std::filesystem::path& path,
                               const std::string& expected_hash);

}  // namespace dicyr
