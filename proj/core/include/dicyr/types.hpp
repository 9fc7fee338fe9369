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
#include <string>
#include <string_view>

#include <torch/torch.h>

namespace dicyr {

/// Training regime: one labelled domain, or labelled source + unlabelled target.
enum class Mode { Single, Uda };

/// Which encoder style head / decoder a batch goes through.
enum class Domain { Single, Source, Target };

std::string_view to_string(Mode mode);
std::string_view to_string(Domain domain);
Mode mode_from_string(std::string_view text);
Domain domain_from_string(std::string_view text);

/// Task embedding and style embedding of one batch.
///
/// Both tensors are [batch, dim] with the same batch size. Dimensions of the
/// two spaces are independent.
struct LatentPair {
  torch::Tensor tau;
  torch::Tensor sigma;

  int64_t batch_size() const { return tau.size(0); }

  /// Throws InvalidArgument when shapes disagree or entries are not finite.
  void validate() const;
};

}  // namespace dicyr
