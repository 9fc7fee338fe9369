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
#include "dicyr/types.hpp"

#include "dicyr/errors.hpp"

namespace dicyr {

std::string_view to_string(Mode mode) { return mode == Mode::Single ? "single" : "uda"; }

std::string_view to_string(Domain domain) {
  switch (domain) {
    case Domain::Single: return "single";
    case Domain::Source: return "source";
    case Domain::Target: return "target";
  }
  return "single";
}

Mode mode_from_string(std::string_view text) {
  if (text == "single") return Mode::Single;
  if (text == "uda") return Mode::Uda;
  throw InvalidArgument("unknown mode '" + std::string(text) + "' (expected single or uda)");
}

Domain domain_from_string(std::string_view text) {
  if (text == "single") return Domain::Single;
  if (text == "source") return Domain::Source;
  if (text == "target") return Domain::Target;
  throw InvalidArgument("unknown domain '" + std::string(text) + "'");
}

void LatentPair::validate() const {
  if (!tau.defined() || !sigma.defined()) throw InvalidArgument("latent pair has an undefined tensor");
  if (tau.dim() != 2 || sigma.dim() != 2) throw InvalidArgument("latent tensors must be [batch, dim]");
  if (tau.size(0) != sigma.size(0)) {
    throw InvalidArgument("tau and sigma batch sizes differ (" + std::to_string(tau.size(0)) + " vs " +
                          std::to_string(sigma.size(0)) + ")");
  }
  if (!torch::isfinite(tau).all().item<bool>() || !torch::isfinite(sigma).all().item<bool>()) {
    throw InvalidArgument("latent pair has non-finite entries");
  }
}

}  // namespace dicyr
