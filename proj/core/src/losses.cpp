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
#include "dicyr/losses.hpp"

#include <algorithm>
#include <cmath>

#include "dicyr/errors.hpp"

namespace dicyr {

namespace {

void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
  if (!a.defined() || !b.defined()) {
    throw InvalidArgument(std::string(what) + ": undefined tensor");
  }
  if (a.sizes() != b.sizes()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch " + c10::str(a.sizes()) + " vs " +
                          c10::str(b.sizes()));
  }
}

class GradientReversal : public torch::autograd::Function<GradientReversal> {
 public:
  static torch::Tensor forward(torch::autograd::AutogradContext* ctx, const torch::Tensor& x, double scale) {
    ctx->saved_data["scale"] = scale;
    return x.clone();
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grad_outputs) {
    const double scale = ctx->saved_data["scale"].toDouble();
    return {grad_outputs[0] * (-scale), torch::Tensor()};
  }
};

}  // namespace

double schedule_value(const ScheduleSpec& spec, int64_t epoch) {
  if (spec.ramp_epochs <= 0) {
    throw InvalidArgument("schedule ramp_epochs must be positive");
  }
  if (epoch < 0) {
    throw InvalidArgument("schedule epoch must be nonnegative");
  }
  const double t = std::min(static_cast<double>(epoch) / static_cast<double>(spec.ramp_epochs), 1.0);
  return spec.start_value + t * (spec.end_value - spec.start_value);
}

LossWeights LossWeights::single_domain_defaults() { return LossWeights{}; }

LossWeights LossWeights::uda_defaults() {
  LossWeights w;
  w.beta_c2 = 1.0;
  return w;
}

std::vector<std::pair<std::string, double>> LossBreakdown::items() const {
  std::vector<std::pair<std::string, double>> out;
  auto add = [&out](const char* name, const std::optional<double>& v) {
    if (v) out.emplace_back(name, *v);
  };
  add("l_c1", l_c1);
  add("l_c1s", l_c1s);
  add("l_c1t", l_c1t);
  add("l_c2", l_c2);
  add("l_c2s", l_c2s);
  add("l_c2t", l_c2t);
  add("l_c3", l_c3);
  add("l_r_tau", l_r_tau);
  add("l_r_sigma", l_r_sigma);
  add("l_c4", l_c4);
  add("total", total);
  return out;
}

void LossBreakdown::accumulate(const LossBreakdown& step, int64_t count_before) {
  const double n = static_cast<double>(count_before);
  auto mix = [n](std::optional<double>& acc, const std::optional<double>& v) {
    if (!v) return;
    acc = acc ? (*acc * n + *v) / (n + 1.0) : *v;
  };
  mix(l_c1, step.l_c1);
  mix(l_c1s, step.l_c1s);
  mix(l_c1t, step.l_c1t);
  mix(l_c2, step.l_c2);
  mix(l_c2s, step.l_c2s);
  mix(l_c2t, step.l_c2t);
  mix(l_c3, step.l_c3);
  mix(l_r_tau, step.l_r_tau);
  mix(l_r_sigma, step.l_r_sigma);
  mix(l_c4, step.l_c4);
  mix(total, step.total);
}

torch::Tensor gradient_reversal(const torch::Tensor& x, double scale) {
  if (!std::isfinite(scale)) {
    throw InvalidArgument("gradient_reversal scale must be finite");
  }
  return GradientReversal::apply(x, scale);
}

torch::Tensor reconstruction_loss(const torch::Tensor& x_hat, const torch::Tensor& x) {
  require_same_shape(x_hat, x, "reconstruction_loss");
  return (x_hat - x).pow(2).mean();
}

torch::Tensor task_loss(const torch::Tensor& logits, const torch::Tensor& labels) {
  if (logits.dim() != 2 || labels.dim() != 1 || labels.size(0) != logits.size(0)) {
    throw InvalidArgument("task_loss: expected logits [B, C] and labels [B]");
  }
  if (labels.numel() > 0) {
    const int64_t lo = labels.min().item<int64_t>();
    const int64_t hi = labels.max().item<int64_t>();
    if (lo < 0 || hi >= logits.size(1)) {
      throw InvalidArgument("task_loss: label out of range [0, " + std::to_string(logits.size(1)) + ")");
    }
  }
  return torch::nn::functional::cross_entropy(logits, labels);
}

torch::Tensor mean_row_distance(const torch::Tensor& a, const torch::Tensor& b) {
  require_same_shape(a, b, "mean_row_distance");
  return (a - b).flatten(1).norm(2, 1).mean();
}

OrthogonalityLosses orthogonality_losses(const LatentPair& latent,
                                         const torch::Tensor& tau_hat,
                                         const torch::Tensor& sigma_hat) {
  require_same_shape(latent.tau, tau_hat, "orthogonality_losses tau");
  require_same_shape(latent.sigma, sigma_hat, "orthogonality_losses sigma");
  OrthogonalityLosses out;
  out.r_tau = mean_row_distance(latent.tau, tau_hat);
  out.r_sigma = mean_row_distance(latent.sigma, sigma_hat);
  out.total = out.r_tau + out.r_sigma;
  return out;
}

torch::Tensor cyclic_loss(const torch::Tensor& tau,
                          const torch::Tensor& tau_tilde,
                          const torch::Tensor& sigma,
                          const torch::Tensor& sigma_prime,
                          const torch::Tensor& sigma_tilde,
                          double margin) {
  if (margin < 0.0 || !std::isfinite(margin)) {
    throw InvalidArgument("cyclic_loss: margin must be finite and nonnegative");
  }
  require_same_shape(tau, tau_tilde, "cyclic_loss tau");
  require_same_shape(sigma, sigma_prime, "cyclic_loss sigma_prime");
  require_same_shape(sigma, sigma_tilde, "cyclic_loss sigma_tilde");
  auto task = (tau_tilde - tau).flatten(1).norm(2, 1);
  auto pos = (sigma_tilde - sigma_prime).flatten(1).norm(2, 1);
  auto neg = (sigma_tilde - sigma).flatten(1).norm(2, 1);
  auto triplet = torch::relu(pos - neg + margin);
  return (task + triplet).mean();
}

std::string_view to_string(CrossDomainVariant variant) {
  return variant == CrossDomainVariant::Feature ? "feature" : "task_oriented";
}

CrossDomainVariant cross_domain_variant_from_string(std::string_view text) {
  if (text == "feature") return CrossDomainVariant::Feature;
  if (text == "task_oriented") return CrossDomainVariant::TaskOriented;
  throw InvalidArgument("unknown cross-domain variant '" + std::string(text) +
                        "' (expected feature or task_oriented)");
}

torch::Tensor cross_domain_task_loss(const CrossDomainInputs& in, CrossDomainVariant variant) {
  if (variant == CrossDomainVariant::Feature) {
    if (!in.tau_source.defined() || !in.tau_source_cycled.defined() || !in.tau_target.defined() ||
        !in.tau_target_cycled.defined()) {
      throw InvalidArgument("cross_domain_task_loss(feature): the four task embeddings are required");
    }
    require_same_shape(in.tau_source, in.tau_source_cycled, "cross_domain_task_loss source");
    require_same_shape(in.tau_target, in.tau_target_cycled, "cross_domain_task_loss target");
    auto s = (in.tau_source - in.tau_source_cycled).flatten(1).norm(2, 1);
    auto t = (in.tau_target - in.tau_target_cycled).flatten(1).norm(2, 1);
    return (s + t).mean();
  }
  if (!in.probs_target.defined() || !in.probs_source_cycled.defined() || !in.probs_target_cycled.defined() ||
      !in.labels_source.defined()) {
    throw InvalidArgument(
        "cross_domain_task_loss(task_oriented): classifier outputs and source labels are required");
  }
  require_same_shape(in.probs_target, in.probs_target_cycled, "cross_domain_task_loss target probs");
  if (in.probs_source_cycled.dim() != 2 || in.labels_source.dim() != 1 ||
      in.labels_source.size(0) != in.probs_source_cycled.size(0)) {
    throw InvalidArgument("cross_domain_task_loss: expected probs [B, C] and labels [B]");
  }
  const int64_t classes = in.probs_source_cycled.size(1);
  if (in.labels_source.numel() > 0 &&
      (in.labels_source.min().item<int64_t>() < 0 || in.labels_source.max().item<int64_t>() >= classes)) {
    throw InvalidArgument("cross_domain_task_loss: label out of range");
  }
  auto onehot = torch::one_hot(in.labels_source, classes).to(in.probs_source_cycled.dtype());
  auto s = (in.probs_source_cycled - onehot).norm(2, 1);
  auto t = (in.probs_target - in.probs_target_cycled).norm(2, 1);
  return (s + t).mean();
}

double total_loss(const LossBreakdown& b, const LossWeights& w, int64_t epoch, Mode mode) {
  auto v = [](const std::optional<double>& x) { return x.value_or(0.0); };
  const double b3 = schedule_value(w.beta_c3, epoch);
  if (mode == Mode::Single) {
    return v(b.l_c1) + w.beta_c2 * v(b.l_c2) - b3 * v(b.l_c3) + w.beta_c4 * v(b.l_c4);
  }
  const double b1t = schedule_value(w.beta_c1t, epoch);
  return v(b.l_c1s) + b1t * v(b.l_c1t) + w.beta_c2 * (v(b.l_c2s) + v(b.l_c2t)) - b3 * v(b.l_c3) +
         w.beta_c4 * v(b.l_c4);
}

}  // namespace dicyr
