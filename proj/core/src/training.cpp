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
#include "dicyr/training.hpp"

#include <cmath>
#include <fstream>

#include <ATen/CPUGeneratorImpl.h>
#include <nlohmann/json.hpp>

#include "dicyr/data.hpp"
#include "dicyr/errors.hpp"

namespace dicyr {

namespace fs = std::filesystem;

namespace {

double value_of(const torch::Tensor& t) { return t.item<double>(); }

void check_term(const char* name, const torch::Tensor& t) {
  const double v = value_of(t);
  if (!std::isfinite(v)) throw NonFiniteLoss(name, v);
}

std::vector<torch::Tensor> encoder_and_classifier(ModelBundle& bundle) {
  auto out = bundle->group_parameters(ParamGroup::Encoder);
  auto c = bundle->group_parameters(ParamGroup::Classifier);
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

}  // namespace

Trainer::Trainer(ModelBundle bundle, LossWeights weights, OptimizerSchedule schedule, CrossDomainVariant variant)
    : bundle_(std::move(bundle)), weights_(weights), schedule_(schedule), variant_(variant) {
  std::vector<torch::optim::OptimizerParamGroup> groups;
  for (ParamGroup g : kAllParamGroups) {
    auto params = bundle_->group_parameters(g);
    if (params.empty()) continue;
    groups.emplace_back(params, std::make_unique<torch::optim::AdamOptions>(schedule_.initial));
  }
  optimizer_ = std::make_unique<torch::optim::Adam>(groups, torch::optim::AdamOptions(schedule_.initial));
}

void Trainer::apply_lr(int64_t epoch) {
  const double lr = schedule_.lr_at(epoch);
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
  }
}

void Trainer::check_finite(const LossBreakdown& b) const {
  for (const auto& [name, v] : b.items()) {
    if (!std::isfinite(v)) throw NonFiniteLoss(name, v);
  }
}

LossBreakdown Trainer::step_single(const torch::Tensor& x, const torch::Tensor& y, int64_t epoch,
                                   const ActiveTerms& terms) {
  if (bundle_->mode() != Mode::Single) {
    throw InvalidArgument("step_single needs a single-domain bundle");
  }
  if (!y.defined() || y.dim() != 1 || y.size(0) != x.size(0)) {
    throw InvalidArgument("step_single needs one label per image");
  }
  const double b3 = schedule_value(weights_.beta_c3, epoch);
  const bool c1 = terms.c1;
  const bool c2 = terms.c2s && weights_.beta_c2 > 0.0;
  const bool c3 = terms.c3 && b3 > 0.0;
  const bool c4 = terms.c4 && weights_.beta_c4 > 0.0;

  bundle_->train();
  optimizer_->zero_grad();
  LossBreakdown out;
  std::vector<torch::Tensor> parts;

  const LatentPair lat = encode(bundle_, x, Domain::Single);
  if (c1) {
    auto l = task_loss(classifier_logits(bundle_, lat.tau), y);
    check_term("l_c1", l);
    out.l_c1 = value_of(l);
    parts.push_back(l);
  }
  if (c2) {
    auto l = reconstruction_loss(decode(bundle_, lat, Domain::Single), x);
    check_term("l_c2", l);
    out.l_c2 = value_of(l);
    parts.push_back(weights_.beta_c2 * l);
  }
  if (c3) {
    // The GRL inside the predictors scales and flips what reaches the
    // encoder; targets are constants so only the predictor inputs carry it.
    const auto pred = cross_predict(bundle_, lat, b3);
    const auto r = orthogonality_losses({lat.tau.detach(), lat.sigma.detach()}, pred.tau_hat, pred.sigma_hat);
    check_term("l_c3", r.total);
    out.l_r_tau = value_of(r.r_tau);
    out.l_r_sigma = value_of(r.r_sigma);
    out.l_c3 = value_of(r.total);
    parts.push_back(r.total);
  }
  if (c4) {
    const auto sigma_prime = pair_for_cycle(lat.sigma).second;
    const auto x_tilde = decode(bundle_, {lat.tau, sigma_prime}, Domain::Single);
    const auto re = encode(bundle_, x_tilde, Domain::Single);
    auto l = cyclic_loss(lat.tau, re.tau, lat.sigma, sigma_prime, re.sigma, weights_.margin);
    check_term("l_c4", l);
    out.l_c4 = value_of(l);
    parts.push_back(weights_.beta_c4 * l);
  }
  if (!parts.empty()) {
    torch::Tensor objective = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) objective = objective + parts[i];
    objective.backward();
    optimizer_->step();
  }
  out.total = total_loss(out, weights_, epoch, Mode::Single);
  check_finite(out);
  return out;
}

LossBreakdown Trainer::step_uda(const torch::Tensor& xs, const torch::Tensor& ys, const torch::Tensor& xt,
                                int64_t epoch, const ActiveTerms& terms) {
  if (bundle_->mode() != Mode::Uda) {
    throw InvalidArgument("step_uda needs a UDA bundle");
  }
  if (xs.size(0) != xt.size(0)) {
    throw InvalidArgument("step_uda: source and target batches must have equal sizes (" + std::to_string(xs.size(0)) +
                          " vs " + std::to_string(xt.size(0)) + ")");
  }
  if (!ys.defined() || ys.dim() != 1 || ys.size(0) != xs.size(0)) {
    throw InvalidArgument("step_uda needs one label per source image");
  }
  const double b3 = schedule_value(weights_.beta_c3, epoch);
  const double b1t = schedule_value(weights_.beta_c1t, epoch);
  const bool c1 = terms.c1;
  const bool c2s = terms.c2s && weights_.beta_c2 > 0.0;
  const bool c2t = terms.c2t && weights_.beta_c2 > 0.0;
  const bool c3 = terms.c3 && b3 > 0.0;
  const bool c4 = terms.c4 && weights_.beta_c4 > 0.0;
  const bool c1t = terms.c1t && b1t > 0.0;

  bundle_->train();
  optimizer_->zero_grad();
  LossBreakdown out;
  std::vector<torch::Tensor> parts;

  const LatentPair ls = encode(bundle_, xs, Domain::Source);
  // Target images stay out of the forward pass (and normalization
  // statistics) unless some term uses them.
  const bool uses_target = c2t || c3 || c4 || c1t;
  const LatentPair lt = uses_target ? encode(bundle_, xt, Domain::Target) : LatentPair{};

  if (c1) {
    auto l = task_loss(classifier_logits(bundle_, ls.tau), ys);
    check_term("l_c1s", l);
    out.l_c1s = value_of(l);
    out.l_c1 = out.l_c1s;
    parts.push_back(l);
  }
  if (c2s || c2t) {
    double sum = 0.0;
    if (c2s) {
      auto l = reconstruction_loss(decode(bundle_, ls, Domain::Source), xs);
      check_term("l_c2s", l);
      out.l_c2s = value_of(l);
      sum += *out.l_c2s;
      parts.push_back(weights_.beta_c2 * l);
    }
    if (c2t) {
      auto l = reconstruction_loss(decode(bundle_, lt, Domain::Target), xt);
      check_term("l_c2t", l);
      out.l_c2t = value_of(l);
      sum += *out.l_c2t;
      parts.push_back(weights_.beta_c2 * l);
    }
    out.l_c2 = sum;
  }
  if (c3) {
    const LatentPair both{torch::cat({ls.tau, lt.tau}), torch::cat({ls.sigma, lt.sigma})};
    const auto pred = cross_predict(bundle_, both, b3);
    const auto r = orthogonality_losses({both.tau.detach(), both.sigma.detach()}, pred.tau_hat, pred.sigma_hat);
    check_term("l_c3", r.total);
    out.l_r_tau = value_of(r.r_tau);
    out.l_r_sigma = value_of(r.r_sigma);
    out.l_c3 = value_of(r.total);
    parts.push_back(r.total);
  }
  if (c4) {
    torch::Tensor l4;
    for (const auto& [lat, domain] : {std::pair{ls, Domain::Source}, std::pair{lt, Domain::Target}}) {
      const auto sigma_prime = pair_for_cycle(lat.sigma).second;
      const auto x_tilde = decode(bundle_, {lat.tau, sigma_prime}, domain);
      const auto re = encode(bundle_, x_tilde, domain);
      auto l = cyclic_loss(lat.tau, re.tau, lat.sigma, sigma_prime, re.sigma, weights_.margin);
      l4 = l4.defined() ? l4 + l : l;
    }
    check_term("l_c4", l4);
    out.l_c4 = value_of(l4);
    parts.push_back(weights_.beta_c4 * l4);
  }

  std::vector<torch::Tensor> c1t_params;
  std::vector<torch::Tensor> c1t_grads;
  if (c1t) {
    // x_st: source content in target style; x_ts: the converse. Each is
    // re-encoded with the style head of the domain it was decoded into.
    const auto x_st = decode(bundle_, {ls.tau, lt.sigma}, Domain::Target);
    const auto x_ts = decode(bundle_, {lt.tau, ls.sigma}, Domain::Source);
    const auto e_st = encode(bundle_, x_st, Domain::Target);
    const auto e_ts = encode(bundle_, x_ts, Domain::Source);
    CrossDomainInputs in;
    if (variant_ == CrossDomainVariant::Feature) {
      in.tau_source = ls.tau;
      in.tau_source_cycled = e_st.tau;
      in.tau_target = lt.tau;
      in.tau_target_cycled = e_ts.tau;
    } else {
      in.probs_target = classify(bundle_, lt.tau);
      in.probs_source_cycled = classify(bundle_, e_st.tau);
      in.probs_target_cycled = classify(bundle_, e_ts.tau);
      in.labels_source = ys;
    }
    auto l = cross_domain_task_loss(in, variant_);
    check_term("l_c1t", l);
    out.l_c1t = value_of(l);
    // Decoder parameters take no part in this term: differentiate only
    // w.r.t. encoder and classifier, activations still flow through.
    c1t_params = encoder_and_classifier(bundle_);
    c1t_grads = torch::autograd::grad({b1t * l}, c1t_params, {}, /*retain_graph=*/true, /*create_graph=*/false,
                                      /*allow_unused=*/true);
  }
  if (!parts.empty()) {
    torch::Tensor objective = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i) objective = objective + parts[i];
    objective.backward();
  }
  for (std::size_t i = 0; i < c1t_params.size(); ++i) {
    if (!c1t_grads[i].defined()) continue;
    auto& g = c1t_params[i].mutable_grad();
    g = g.defined() ? g + c1t_grads[i] : c1t_grads[i].clone();
  }
  if (!parts.empty() || c1t) optimizer_->step();

  out.total = total_loss(out, weights_, epoch, Mode::Uda);
  check_finite(out);
  return out;
}

LossBreakdown train_step_single(Trainer& trainer, const torch::Tensor& x, const torch::Tensor& y, int64_t epoch,
                                const ActiveTerms& terms) {
  return trainer.step_single(x, y, epoch, terms);
}

LossBreakdown train_step_uda(Trainer& trainer, const torch::Tensor& xs, const torch::Tensor& ys,
                             const torch::Tensor& xt, int64_t epoch, const ActiveTerms& terms) {
  return trainer.step_uda(xs, ys, xt, epoch, terms);
}

namespace {

fs::path sidecar_path(const fs::path& path) { return fs::path(path.string() + ".json"); }

void write_meta(const CheckpointMeta& meta, const fs::path& path) {
  nlohmann::json j;
  j["config_hash"] = meta.config_hash;
  j["epoch"] = meta.epoch;
  j["seed"] = meta.seed;
  j["metrics"] = meta.metrics_json.empty() ? nlohmann::json(nullptr) : nlohmann::json::parse(meta.metrics_json);
  std::ofstream(sidecar_path(path)) << j.dump(2) << "\n";
}

void check_hash(const CheckpointMeta& meta, const std::string& expected, const fs::path& path) {
  if (!expected.empty() && meta.config_hash != expected) {
    throw IncompatibleCheckpoint("checkpoint " + path.string() + " was written for architecture " + meta.config_hash +
                                 ", current configuration is " + expected);
  }
}

}  // namespace

void save_checkpoint(Trainer& trainer, const CheckpointMeta& meta, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive archive;
  torch::serialize::OutputArchive model;
  trainer.bundle()->save(model);
  archive.write("model", model);
  torch::serialize::OutputArchive optim;
  trainer.optimizer().save(optim);
  archive.write("optimizer", optim);
  archive.write("rng_state", at::detail::getDefaultCPUGenerator().get_state());
  archive.save_to(path.string());
  write_meta(meta, path);
}

CheckpointMeta read_checkpoint_meta(const fs::path& path) {
  std::ifstream in(sidecar_path(path));
  if (!in) {
    throw IncompatibleCheckpoint("checkpoint manifest missing: " + sidecar_path(path).string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IncompatibleCheckpoint("checkpoint manifest unreadable: " + std::string(e.what()));
  }
  CheckpointMeta meta;
  meta.config_hash = j.value("config_hash", std::string());
  meta.epoch = j.value("epoch", int64_t{0});
  meta.seed = j.value("seed", uint64_t{0});
  if (j.contains("metrics") && !j["metrics"].is_null()) meta.metrics_json = j["metrics"].dump();
  return meta;
}

CheckpointMeta load_checkpoint(Trainer& trainer, const fs::path& path, const std::string& expected_hash) {
  CheckpointMeta meta = read_checkpoint_meta(path);
  check_hash(meta, expected_hash, path);
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  torch::serialize::InputArchive model;
  archive.read("model", model);
  trainer.bundle()->load(model);
  torch::serialize::InputArchive optim;
  archive.read("optimizer", optim);
  trainer.optimizer().load(optim);
  torch::Tensor rng;
  archive.read("rng_state", rng);
  auto gen = at::detail::getDefaultCPUGenerator();
  std::lock_guard<std::mutex> lock(gen.mutex());
  gen.set_state(rng);
  return meta;
}

CheckpointMeta load_checkpoint(ModelBundle& bundle, const fs::path& path, const std::string& expected_hash) {
  CheckpointMeta meta = read_checkpoint_meta(path);
  check_hash(meta, expected_hash, path);
  torch::serialize::InputArchive archive;
  archive.load_from(path.string());
  torch::serialize::InputArchive model;
  archive.read("model", model);
  bundle->load(model);
  return meta;
}

}  // namespace dicyr
