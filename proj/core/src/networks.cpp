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
#include "dicyr/networks.hpp"

#include <sstream>

#include "dicyr/errors.hpp"
#include "dicyr/losses.hpp"

namespace dicyr {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string shape_str(const std::vector<int64_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

torch::Tensor activate(const torch::Tensor& x, Activation act, bool allow_softmax) {
  switch (act) {
    case Activation::Linear: return x;
    case Activation::Relu: return torch::relu(x);
    case Activation::Sigmoid: return torch::sigmoid(x);
    case Activation::Softmax: return allow_softmax ? torch::softmax(x, 1) : x;
  }
  return x;
}

}  // namespace

struct SpecNetworkImpl::Step {
  enum class Kind { Conv, Pool, Upsample, Dense, Dropout, Norm, Flatten, Reshape, Grl, UnitNorm } kind;
  Activation activation = Activation::Linear;
  torch::nn::Conv2d conv{nullptr};
  torch::nn::Linear linear{nullptr};
  torch::nn::Dropout dropout{nullptr};
  torch::nn::AnyModule norm;
  bool has_norm = false;
  int64_t size = 0;
  int64_t stride = 0;
  std::vector<int64_t> shape;
};

SpecNetworkImpl::SpecNetworkImpl(std::string name,
                                 const NetworkSpec& spec,
                                 std::vector<int64_t> input_shape,
                                 std::optional<std::array<int64_t, 2>> output_hw,
                                 int64_t auto_units)
    : name_(std::move(name)) {
  using namespace layers;
  if (input_shape.size() != 1 && input_shape.size() != 3) {
    throw BuildError(name_, 0, "input shape must be [features] or [channels, height, width]");
  }
  const auto& L = spec.layers;

  // Decoder pre-pass: spatial size right after the reshape, and whether the
  // dense layer feeding it must be resized.
  std::optional<std::size_t> reshape_at;
  int64_t reshape_h = 0, reshape_w = 0, reshape_c = 0, fixed_dense_units = 0;
  std::optional<std::size_t> feeding_dense;
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (std::holds_alternative<Reshape>(L[i])) {
      reshape_at = i;
      break;
    }
  }
  if (reshape_at && std::get<Reshape>(L[*reshape_at]).shape.empty()) {
    if (!output_hw) {
      throw BuildError(name_, *reshape_at, "automatic reshape needs a target output resolution");
    }
    int64_t factor = 1;
    std::optional<int64_t> next_filters;
    for (std::size_t i = *reshape_at + 1; i < L.size(); ++i) {
      if (const auto* u = std::get_if<Upsample>(&L[i])) factor *= u->factor;
      if (const auto* c = std::get_if<Conv>(&L[i]); c && !next_filters) next_filters = c->filters;
      if (std::holds_alternative<MaxPool>(L[i])) {
        throw BuildError(name_, i, "pooling after an automatic reshape is not supported");
      }
    }
    if ((*output_hw)[0] % factor != 0 || (*output_hw)[1] % factor != 0) {
      throw BuildError(name_, *reshape_at,
                       "output resolution is not divisible by the total upsampling factor " + std::to_string(factor));
    }
    reshape_h = (*output_hw)[0] / factor;
    reshape_w = (*output_hw)[1] / factor;
    for (std::size_t i = *reshape_at; i-- > 0;) {
      if (std::holds_alternative<Dense>(L[i])) {
        feeding_dense = i;
        break;
      }
    }
    if (!feeding_dense) throw BuildError(name_, *reshape_at, "automatic reshape needs a preceding dense layer");
    const int64_t units = std::get<Dense>(L[*feeding_dense]).units;
    const int64_t cells = reshape_h * reshape_w;
    if (units > 0 && units % cells == 0) {
      reshape_c = units / cells;
    } else {
      reshape_c = next_filters.value_or(1);
      fixed_dense_units = reshape_c * cells;
      notes_.push_back(name_ + " layer " + std::to_string(*feeding_dense) + ": dense units " + std::to_string(units) +
                       " -> " + std::to_string(fixed_dense_units) + " to reshape into " + std::to_string(reshape_c) +
                       "x" + std::to_string(reshape_h) + "x" + std::to_string(reshape_w));
    }
  }

  std::vector<int64_t> shape = input_shape;
  for (std::size_t i = 0; i < L.size(); ++i) {
    auto step = std::make_shared<Step>();
    const std::string key = std::to_string(i);
    auto fail = [&](const std::string& what) { throw BuildError(name_, i, describe(L[i]) + " on " + shape_str(shape) + ": " + what); };

    std::visit(
        Overloaded{
            [&](const Conv& c) {
              if (shape.size() != 3) fail("convolution needs a [C, H, W] input");
              if (c.filters <= 0 || c.kernel <= 0 || c.stride <= 0) fail("filters, kernel and stride must be positive");
              int64_t pad = c.padding < 0 ? (c.kernel - 1) / 2 : c.padding;
              if (output_hw && c.stride == 1 && 2 * pad != c.kernel - 1 && c.kernel % 2 == 1) {
                const int64_t same = (c.kernel - 1) / 2;
                notes_.push_back(name_ + " layer " + key + ": padding " + std::to_string(pad) + " -> " +
                                 std::to_string(same) + " (same) to keep the decoder resolution");
                pad = same;
              }
              const int64_t h = (shape[1] + 2 * pad - c.kernel) / c.stride + 1;
              const int64_t w = (shape[2] + 2 * pad - c.kernel) / c.stride + 1;
              if (h <= 0 || w <= 0) fail("spatial size collapses to zero");
              step->kind = Step::Kind::Conv;
              step->activation = c.activation;
              step->conv = register_module(
                  key, torch::nn::Conv2d(torch::nn::Conv2dOptions(shape[0], c.filters, c.kernel).stride(c.stride).padding(pad)));
              shape = {c.filters, h, w};
            },
            [&](const MaxPool& m) {
              if (shape.size() != 3) fail("pooling needs a [C, H, W] input");
              if (shape[1] < m.size || shape[2] < m.size) fail("input smaller than the pooling window");
              step->kind = Step::Kind::Pool;
              step->size = m.size;
              step->stride = m.stride;
              shape = {shape[0], (shape[1] - m.size) / m.stride + 1, (shape[2] - m.size) / m.stride + 1};
            },
            [&](const Upsample& u) {
              if (shape.size() != 3) fail("upsampling needs a [C, H, W] input");
              if (u.factor < 1) fail("factor must be at least 1");
              step->kind = Step::Kind::Upsample;
              step->size = u.factor;
              shape = {shape[0], shape[1] * u.factor, shape[2] * u.factor};
            },
            [&](const Dense& d) {
              int64_t in = 1;
              for (int64_t s : shape) in *= s;
              int64_t units = d.units == 0 ? auto_units : d.units;
              if (feeding_dense && *feeding_dense == i && fixed_dense_units > 0) units = fixed_dense_units;
              if (units <= 0) fail("units are unresolved (\"auto\" without a known width)");
              step->kind = Step::Kind::Dense;
              step->activation = d.activation;
              step->size = shape.size() == 3 ? 1 : 0;  // flatten first
              step->linear = register_module(key, torch::nn::Linear(in, units));
              shape = {units};
            },
            [&](const Dropout& d) {
              if (d.p < 0.0 || d.p >= 1.0) fail("dropout probability must lie in [0, 1)");
              step->kind = Step::Kind::Dropout;
              step->dropout = register_module(key, torch::nn::Dropout(d.p));
            },
            [&](const Normalization& n) {
              step->kind = Step::Kind::Norm;
              if (n.kind == NormKind::None) return;
              step->has_norm = true;
              if (n.kind == NormKind::Batch) {
                if (shape.size() == 3) {
                  step->norm = torch::nn::AnyModule(register_module(key, torch::nn::BatchNorm2d(shape[0])));
                } else {
                  step->norm = torch::nn::AnyModule(register_module(key, torch::nn::BatchNorm1d(shape[0])));
                }
              } else {
                if (shape.size() != 3) fail("instance normalization needs a [C, H, W] input");
                step->norm = torch::nn::AnyModule(register_module(
                    key, torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(shape[0]).affine(true))));
              }
            },
            [&](const Flatten&) {
              step->kind = Step::Kind::Flatten;
              int64_t in = 1;
              for (int64_t s : shape) in *= s;
              shape = {in};
            },
            [&](const Reshape& r) {
              step->kind = Step::Kind::Reshape;
              std::vector<int64_t> target = r.shape;
              if (target.empty()) target = {reshape_c, reshape_h, reshape_w};
              int64_t in = 1, out = 1;
              for (int64_t s : shape) in *= s;
              for (int64_t s : target) out *= s;
              if (in != out) fail("element count " + std::to_string(in) + " does not match " + shape_str(target));
              step->shape = target;
              shape = target;
            },
            [&](const Grl&) { step->kind = Step::Kind::Grl; },
            [&](const UnitNorm&) {
              if (shape.size() != 1) fail("unit norm needs a [features] input");
              step->kind = Step::Kind::UnitNorm;
            },
        },
        L[i]);
    steps_.push_back(step);
  }
  if (output_hw && (shape.size() != 3 || shape[1] != (*output_hw)[0] || shape[2] != (*output_hw)[1])) {
    throw BuildError(name_, L.empty() ? 0 : L.size() - 1,
                     "final output " + shape_str(shape) + " does not match the requested resolution " +
                         std::to_string((*output_hw)[0]) + "x" + std::to_string((*output_hw)[1]));
  }
  output_shape_ = shape;
}

torch::Tensor SpecNetworkImpl::forward(torch::Tensor x, double grl_scale, bool final_softmax) {
  for (std::size_t i = 0; i < steps_.size(); ++i) {
    Step& s = *steps_[i];
    const bool last = i + 1 == steps_.size();
    switch (s.kind) {
      case Step::Kind::Conv:
        x = activate(s.conv->forward(x), s.activation, true);
        break;
      case Step::Kind::Pool:
        x = torch::max_pool2d(x, {s.size, s.size}, {s.stride, s.stride});
        break;
      case Step::Kind::Upsample:
        x = torch::nn::functional::interpolate(
            x, torch::nn::functional::InterpolateFuncOptions()
                   .scale_factor(std::vector<double>{static_cast<double>(s.size), static_cast<double>(s.size)})
                   .mode(torch::kNearest));
        break;
      case Step::Kind::Dense:
        if (s.size == 1) x = x.flatten(1);
        x = activate(s.linear->forward(x), s.activation, !last || final_softmax);
        break;
      case Step::Kind::Dropout:
        x = s.dropout->forward(x);
        break;
      case Step::Kind::Norm:
        if (s.has_norm) x = s.norm.forward(x);
        break;
      case Step::Kind::Flatten:
        x = x.flatten(1);
        break;
      case Step::Kind::Reshape: {
        std::vector<int64_t> full{x.size(0)};
        full.insert(full.end(), s.shape.begin(), s.shape.end());
        x = x.reshape(full);
        break;
      }
      case Step::Kind::Grl:
        x = gradient_reversal(x, grl_scale);
        break;
      case Step::Kind::UnitNorm:
        x = torch::nn::functional::normalize(x, torch::nn::functional::NormalizeFuncOptions().dim(1).eps(1e-8));
        break;
    }
  }
  return x;
}

std::string_view to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::Encoder: return "encoder";
    case ParamGroup::DecoderSource: return "decoder_source";
    case ParamGroup::DecoderTarget: return "decoder_target";
    case ParamGroup::Classifier: return "classifier";
    case ParamGroup::TauPredictor: return "tau_predictor";
    case ParamGroup::SigmaPredictor: return "sigma_predictor";
  }
  return "encoder";
}

ModelBundleImpl::ModelBundleImpl(const ArchitectureSpec& spec, ImageShape input_shape, int64_t num_classes, Mode mode)
    : mode_(mode), input_shape_(input_shape), num_classes_(num_classes) {
  if (num_classes < 2) throw InvalidArgument("num_classes must be at least 2");
  const std::vector<int64_t> image{input_shape.channels, input_shape.height, input_shape.width};
  trunk = register_module("trunk", SpecNetwork("trunk", spec.trunk, image));
  tau_head = register_module("tau_head", SpecNetwork("tau_head", spec.tau_head, trunk->output_shape()));
  if (tau_head->output_shape().size() != 1) throw BuildError("tau_head", 0, "task head must end in a flat vector");
  tau_dim_ = tau_head->output_shape()[0];

  const std::vector<std::string> suffixes =
      mode == Mode::Single ? std::vector<std::string>{""} : std::vector<std::string>{"_source", "_target"};
  for (const auto& suffix : suffixes) {
    auto head = register_module("sigma_head" + suffix,
                                SpecNetwork("sigma_head" + suffix, spec.sigma_head, trunk->output_shape()));
    if (head->output_shape().size() != 1) throw BuildError("sigma_head" + suffix, 0, "style head must end in a flat vector");
    sigma_heads.push_back(head);
  }
  sigma_dim_ = sigma_heads.front()->output_shape()[0];

  const std::array<int64_t, 2> hw{input_shape.height, input_shape.width};
  for (const auto& suffix : suffixes) {
    auto dec = register_module("decoder" + suffix,
                               SpecNetwork("decoder" + suffix, spec.decoder, std::vector<int64_t>{tau_dim_ + sigma_dim_}, hw));
    if (dec->output_shape()[0] != input_shape.channels) {
      throw BuildError("decoder" + suffix, spec.decoder.layers.size() - 1,
                       "decoder produces " + std::to_string(dec->output_shape()[0]) + " channels, images have " +
                           std::to_string(input_shape.channels));
    }
    decoders.push_back(dec);
  }
  classifier = register_module("classifier", SpecNetwork("classifier", spec.classifier, std::vector<int64_t>{tau_dim_}, std::nullopt, num_classes));
  if (classifier->output_shape() != std::vector<int64_t>{num_classes}) {
    throw BuildError("classifier", spec.classifier.layers.size(), "classifier output must have num_classes entries");
  }
  tau_predictor = register_module("tau_predictor",
                                  SpecNetwork("tau_predictor", spec.tau_predictor, std::vector<int64_t>{sigma_dim_}, std::nullopt, tau_dim_));
  sigma_predictor = register_module(
      "sigma_predictor", SpecNetwork("sigma_predictor", spec.sigma_predictor, std::vector<int64_t>{tau_dim_}, std::nullopt, sigma_dim_));
  if (tau_predictor->output_shape() != std::vector<int64_t>{tau_dim_}) {
    throw BuildError("tau_predictor", spec.tau_predictor.layers.size(), "must output the task embedding width");
  }
  if (sigma_predictor->output_shape() != std::vector<int64_t>{sigma_dim_}) {
    throw BuildError("sigma_predictor", spec.sigma_predictor.layers.size(), "must output the style embedding width");
  }
}

std::size_t ModelBundleImpl::domain_index(Domain domain) const {
  if (mode_ == Mode::Single) {
    if (domain != Domain::Single) {
      throw InvalidArgument("domain '" + std::string(to_string(domain)) + "' is not available in single-domain mode");
    }
    return 0;
  }
  if (domain == Domain::Source) return 0;
  if (domain == Domain::Target) return 1;
  throw InvalidArgument("domain 'single' is not available in UDA mode");
}

std::vector<torch::Tensor> ModelBundleImpl::group_parameters(ParamGroup group) const {
  std::vector<torch::Tensor> out;
  auto add = [&out](const auto& net) {
    for (const auto& p : net->parameters()) out.push_back(p);
  };
  switch (group) {
    case ParamGroup::Encoder:
      add(trunk);
      add(tau_head);
      for (const auto& h : sigma_heads) add(h);
      break;
    case ParamGroup::DecoderSource:
      add(decoders.at(0));
      break;
    case ParamGroup::DecoderTarget:
      if (decoders.size() > 1) add(decoders.at(1));
      break;
    case ParamGroup::Classifier:
      add(classifier);
      break;
    case ParamGroup::TauPredictor:
      add(tau_predictor);
      break;
    case ParamGroup::SigmaPredictor:
      add(sigma_predictor);
      break;
  }
  return out;
}

std::vector<std::string> ModelBundleImpl::build_notes() const {
  std::vector<std::string> out;
  auto add = [&out](const SpecNetwork& n) { out.insert(out.end(), n->build_notes().begin(), n->build_notes().end()); };
  add(trunk);
  add(tau_head);
  for (const auto& h : sigma_heads) add(h);
  for (const auto& d : decoders) add(d);
  add(classifier);
  add(tau_predictor);
  add(sigma_predictor);
  return out;
}

ModelBundle build_model(const ArchitectureSpec& spec, ImageShape input_shape, int64_t num_classes, Mode mode) {
  return ModelBundle(spec, input_shape, num_classes, mode);
}

LatentPair encode(ModelBundle& bundle, const torch::Tensor& x, Domain domain) {
  const auto s = bundle->input_shape();
  if (x.dim() != 4 || x.size(1) != s.channels || x.size(2) != s.height || x.size(3) != s.width) {
    throw InvalidArgument("encode: expected images [B, " + std::to_string(s.channels) + ", " + std::to_string(s.height) +
                          ", " + std::to_string(s.width) + "], got " + c10::str(x.sizes()));
  }
  const std::size_t d = bundle->domain_index(domain);
  auto h = bundle->trunk->forward(x);
  return {bundle->tau_head->forward(h), bundle->sigma_heads[d]->forward(h)};
}

torch::Tensor decode(ModelBundle& bundle, const LatentPair& latent, Domain domain) {
  if (latent.tau.dim() != 2 || latent.sigma.dim() != 2 || latent.tau.size(1) != bundle->tau_dim() ||
      latent.sigma.size(1) != bundle->sigma_dim() || latent.tau.size(0) != latent.sigma.size(0)) {
    throw InvalidArgument("decode: latent dims do not match the decoder input");
  }
  const std::size_t d = bundle->domain_index(domain);
  return bundle->decoders[d]->forward(torch::cat({latent.tau, latent.sigma}, 1));
}

namespace {
void check_tau(ModelBundle& bundle, const torch::Tensor& tau) {
  if (tau.dim() != 2 || tau.size(1) != bundle->tau_dim()) {
    throw InvalidArgument("classifier input must be [B, " + std::to_string(bundle->tau_dim()) + "]");
  }
}
}  // namespace

torch::Tensor classify(ModelBundle& bundle, const torch::Tensor& tau) {
  check_tau(bundle, tau);
  return bundle->classifier->forward(tau, 1.0, true);
}

torch::Tensor classifier_logits(ModelBundle& bundle, const torch::Tensor& tau) {
  check_tau(bundle, tau);
  return bundle->classifier->forward(tau, 1.0, false);
}

CrossPrediction cross_predict(ModelBundle& bundle, const LatentPair& latent, double beta_c3) {
  if (latent.tau.dim() != 2 || latent.sigma.dim() != 2 || latent.tau.size(1) != bundle->tau_dim() ||
      latent.sigma.size(1) != bundle->sigma_dim()) {
    throw InvalidArgument("cross_predict: latent dims do not match the predictors");
  }
  return {bundle->tau_predictor->forward(latent.sigma, beta_c3), bundle->sigma_predictor->forward(latent.tau, beta_c3)};
}

}  // namespace dicyr
