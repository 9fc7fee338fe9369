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
#include "dicyr/network_spec.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "dicyr/errors.hpp"

namespace dicyr {

using nlohmann::json;

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::Linear: return "linear";
    case Activation::Relu: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softmax: return "softmax";
  }
  return "linear";
}

std::string_view to_string(NormKind kind) {
  switch (kind) {
    case NormKind::Batch: return "batch";
    case NormKind::Instance: return "instance";
    case NormKind::None: return "none";
  }
  return "none";
}

Activation activation_from_string(std::string_view text) {
  if (text == "linear") return Activation::Linear;
  if (text == "relu") return Activation::Relu;
  if (text == "sigmoid") return Activation::Sigmoid;
  if (text == "softmax") return Activation::Softmax;
  throw InvalidArgument("unknown activation '" + std::string(text) + "'");
}

NormKind norm_kind_from_string(std::string_view text) {
  if (text == "batch") return NormKind::Batch;
  if (text == "instance") return NormKind::Instance;
  if (text == "none") return NormKind::None;
  throw InvalidArgument("unknown normalization '" + std::string(text) + "'");
}

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

using namespace layers;

Conv conv(int64_t filters, int64_t kernel, int64_t padding, Activation act) { return {filters, kernel, 1, padding, act}; }
Dense dense(int64_t units, Activation act = Activation::Relu) { return {units, act}; }

NetworkSpec cross_predictor(std::vector<int64_t> hidden) {
  NetworkSpec s;
  s.layers.push_back(Grl{});
  for (int64_t h : hidden) s.layers.push_back(dense(h));
  s.layers.push_back(dense(0, Activation::Linear));
  return s;
}

NetworkSpec classifier(double dropout) {
  return {{Dropout{dropout}, dense(0, Activation::Softmax)}};
}

NetworkSpec head(int64_t units) { return {{dense(units)}}; }
NetworkSpec unit_head(int64_t units) { return {{dense(units, Activation::Linear), UnitNorm{}}}; }

// Supervised (SVHN / 3D Shapes) table.
ArchitectureSpec supervised(double dropout) {
  ArchitectureSpec a;
  a.trunk = {{conv(32, 5, 2, Activation::Relu), MaxPool{}, conv(32, 5, 2, Activation::Relu), MaxPool{},
              conv(64, 3, 1, Activation::Relu), Flatten{}, dense(1024)}};
  a.tau_head = head(150);
  a.sigma_head = head(150);
  a.decoder = {{dense(1024), dense(8192), Reshape{}, conv(64, 3, 1, Activation::Relu), Upsample{},
                conv(32, 5, 2, Activation::Relu), Upsample{}, conv(3, 5, 2, Activation::Sigmoid)}};
  a.classifier = classifier(dropout);
  a.tau_predictor = cross_predictor({100, 100});
  a.sigma_predictor = cross_predictor({100, 100});
  return a;
}

ArchitectureSpec uda_svhn_mnist() {
  ArchitectureSpec a;
  a.trunk = {{conv(32, 5, 2, Activation::Linear), Normalization{NormKind::Instance}, MaxPool{},
              conv(32, 5, 2, Activation::Linear), Normalization{NormKind::Instance}, MaxPool{},
              conv(32, 3, 2, Activation::Linear), Normalization{NormKind::Instance}, Flatten{}, dense(1024)}};
  a.tau_head = head(75);
  a.sigma_head = head(75);
  a.decoder = {{dense(1024), dense(2048), Reshape{}, conv(32, 3, 1, Activation::Relu), Upsample{},
                conv(32, 5, 2, Activation::Relu), Upsample{}, conv(3, 5, 2, Activation::Sigmoid)}};
  a.classifier = classifier(0.55);
  a.tau_predictor = cross_predictor({100});
  a.sigma_predictor = cross_predictor({100});
  return a;
}

ArchitectureSpec uda_mnist_usps() {
  ArchitectureSpec a;
  a.trunk = {{conv(50, 5, 2, Activation::Relu), Normalization{NormKind::Batch}, MaxPool{},
              conv(75, 5, 2, Activation::Relu), Normalization{NormKind::Batch}, MaxPool{},
              conv(100, 3, 2, Activation::Linear), Normalization{NormKind::Batch}, Flatten{}, dense(1024)}};
  a.tau_head = head(150);
  a.sigma_head = head(150);
  a.decoder = {{dense(1024), dense(6400), Reshape{}, conv(100, 3, 1, Activation::Relu), Upsample{},
                conv(50, 5, 2, Activation::Relu), Upsample{}, conv(3, 5, 2, Activation::Sigmoid)}};
  a.classifier = classifier(0.55);
  a.tau_predictor = cross_predictor({100});
  a.sigma_predictor = cross_predictor({100});
  return a;
}

ArchitectureSpec uda_synsigns_gtsrb() {
  ArchitectureSpec a;
  a.trunk = {{conv(32, 5, 2, Activation::Relu), Normalization{NormKind::Instance}, MaxPool{},
              conv(32, 5, 2, Activation::Relu), Normalization{NormKind::Instance}, MaxPool{},
              conv(32, 3, 2, Activation::Linear), Normalization{NormKind::Instance}, MaxPool{},
              conv(32, 3, 2, Activation::Linear), Normalization{NormKind::Instance}, Flatten{}, dense(1024)}};
  a.tau_head = head(150);
  a.sigma_head = head(150);
  a.decoder = {{dense(1024), dense(1024), Reshape{}, conv(32, 3, 1, Activation::Relu), Upsample{},
                conv(32, 3, 1, Activation::Relu), Upsample{}, conv(32, 5, 2, Activation::Relu), Upsample{},
                conv(3, 5, 2, Activation::Sigmoid)}};
  a.classifier = classifier(0.55);
  a.tau_predictor = cross_predictor({100});
  a.sigma_predictor = cross_predictor({100});
  return a;
}

// Reduced-width digits network for CPU-budget runs (28x28 inputs).
ArchitectureSpec desk_digits() {
  ArchitectureSpec a;
  a.trunk = {{conv(16, 5, 2, Activation::Relu), MaxPool{}, conv(32, 5, 2, Activation::Relu), MaxPool{}, Flatten{},
              dense(256)}};
  a.tau_head = unit_head(32);
  a.sigma_head = unit_head(32);
  a.decoder = {{dense(256), dense(1568), Reshape{}, conv(32, 3, 1, Activation::Relu), Upsample{},
                conv(16, 5, 2, Activation::Relu), Upsample{}, conv(3, 5, 2, Activation::Sigmoid)}};
  a.classifier = classifier(0.55);
  a.tau_predictor = cross_predictor({100, 100});
  a.sigma_predictor = cross_predictor({100, 100});
  return a;
}

}  // namespace

std::string describe(const LayerSpec& layer) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Conv& c) {
                   os << "conv(" << c.filters << ", k=" << c.kernel << ", s=" << c.stride << ", p=";
                   if (c.padding < 0) os << "same"; else os << c.padding;
                   os << ", " << to_string(c.activation) << ")";
                 },
                 [&](const MaxPool& m) { os << "maxpool(" << m.size << ", s=" << m.stride << ")"; },
                 [&](const Upsample& u) { os << "upsample(" << u.factor << ")"; },
                 [&](const Dense& d) {
                   os << "dense(";
                   if (d.units == 0) os << "auto"; else os << d.units;
                   os << ", " << to_string(d.activation) << ")";
                 },
                 [&](const Dropout& d) { os << "dropout(" << d.p << ")"; },
                 [&](const Normalization& n) { os << "normalization(" << to_string(n.kind) << ")"; },
                 [&](const Flatten&) { os << "flatten"; },
                 [&](const Reshape& r) {
                   os << "reshape(";
                   if (r.shape.empty()) os << "auto";
                   for (std::size_t i = 0; i < r.shape.size(); ++i) os << (i ? "x" : "") << r.shape[i];
                   os << ")";
                 },
                 [&](const Grl&) { os << "grl"; },
                 [&](const UnitNorm&) { os << "unit_norm"; },
             },
             layer);
  return os.str();
}

void ArchitectureSpec::override_normalization(NormKind kind) {
  for (NetworkSpec* net : {&trunk, &tau_head, &sigma_head, &decoder, &classifier, &tau_predictor, &sigma_predictor}) {
    for (auto& l : net->layers) {
      if (auto* n = std::get_if<Normalization>(&l)) n->kind = kind;
    }
  }
}

std::vector<std::string> preset_names() {
  return {"supervised_svhn", "supervised_shapes", "uda_svhn_mnist", "uda_mnist_usps", "uda_synsigns_gtsrb",
          "desk_digits"};
}

ArchitectureSpec preset(std::string_view name) {
  if (name == "supervised_svhn") return supervised(0.55);
  if (name == "supervised_shapes") return supervised(0.2);
  if (name == "uda_svhn_mnist") return uda_svhn_mnist();
  if (name == "uda_mnist_usps") return uda_mnist_usps();
  if (name == "uda_synsigns_gtsrb") return uda_synsigns_gtsrb();
  if (name == "desk_digits") return desk_digits();
  throw InvalidArgument("unknown architecture preset '" + std::string(name) + "'");
}

void to_json(json& j, const LayerSpec& layer) {
  std::visit(Overloaded{
                 [&](const Conv& c) {
                   j = {{"type", "conv"}, {"filters", c.filters}, {"kernel", c.kernel}, {"stride", c.stride},
                        {"activation", to_string(c.activation)}};
                   if (c.padding < 0) j["padding"] = "same"; else j["padding"] = c.padding;
                 },
                 [&](const MaxPool& m) { j = {{"type", "maxpool"}, {"size", m.size}, {"stride", m.stride}}; },
                 [&](const Upsample& u) { j = {{"type", "upsample"}, {"factor", u.factor}}; },
                 [&](const Dense& d) {
                   j = {{"type", "dense"}, {"activation", to_string(d.activation)}};
                   if (d.units == 0) j["units"] = "auto"; else j["units"] = d.units;
                 },
                 [&](const Dropout& d) { j = {{"type", "dropout"}, {"p", d.p}}; },
                 [&](const Normalization& n) { j = {{"type", "normalization"}, {"kind", to_string(n.kind)}}; },
                 [&](const Flatten&) { j = {{"type", "flatten"}}; },
                 [&](const Reshape& r) {
                   j = {{"type", "reshape"}};
                   if (r.shape.empty()) j["shape"] = "auto"; else j["shape"] = r.shape;
                 },
                 [&](const Grl&) { j = {{"type", "grl"}}; },
                 [&](const UnitNorm&) { j = {{"type", "unit_norm"}}; },
             },
             layer);
}

namespace {

int64_t int_or_auto(const json& j, const char* key, int64_t auto_value, int64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() == "auto" || v.get<std::string>() == "same") return auto_value;
    throw InvalidArgument(std::string("'") + key + "' must be an integer or \"auto\"");
  }
  return v.get<int64_t>();
}

}  // namespace

void from_json(const json& j, LayerSpec& layer) {
  if (!j.is_object() || !j.contains("type")) {
    throw InvalidArgument("layer entry needs a \"type\" field");
  }
  const auto type = j.at("type").get<std::string>();
  if (type == "conv") {
    Conv c;
    c.filters = j.at("filters").get<int64_t>();
    c.kernel = j.value("kernel", c.kernel);
    c.stride = j.value("stride", c.stride);
    c.padding = int_or_auto(j, "padding", -1, 0);
    c.activation = activation_from_string(j.value("activation", std::string("relu")));
    layer = c;
  } else if (type == "maxpool") {
    MaxPool m;
    m.size = j.value("size", m.size);
    m.stride = j.value("stride", m.size);
    layer = m;
  } else if (type == "upsample") {
    layer = Upsample{j.value("factor", int64_t{2})};
  } else if (type == "dense") {
    Dense d;
    d.units = int_or_auto(j, "units", 0, 0);
    d.activation = activation_from_string(j.value("activation", std::string("relu")));
    layer = d;
  } else if (type == "dropout") {
    layer = Dropout{j.at("p").get<double>()};
  } else if (type == "normalization") {
    layer = Normalization{norm_kind_from_string(j.value("kind", std::string("batch")))};
  } else if (type == "flatten") {
    layer = Flatten{};
  } else if (type == "reshape") {
    Reshape r;
    if (j.contains("shape") && !j.at("shape").is_string()) r.shape = j.at("shape").get<std::vector<int64_t>>();
    layer = r;
  } else if (type == "grl") {
    layer = Grl{};
  } else if (type == "unit_norm") {
    layer = UnitNorm{};
  } else {
    throw InvalidArgument("unknown layer type '" + type + "'");
  }
}

void to_json(json& j, const NetworkSpec& spec) {
  j = json::array();
  for (const auto& l : spec.layers) {
    json lj;
    to_json(lj, l);
    j.push_back(lj);
  }
}

void from_json(const json& j, NetworkSpec& spec) {
  if (!j.is_array()) throw InvalidArgument("network spec must be a list of layers");
  spec.layers.clear();
  for (const auto& e : j) {
    LayerSpec l;
    from_json(e, l);
    spec.layers.push_back(l);
  }
}

void to_json(json& j, const ArchitectureSpec& a) {
  j = {{"trunk", a.trunk},           {"tau_head", a.tau_head},           {"sigma_head", a.sigma_head},
       {"decoder", a.decoder},       {"classifier", a.classifier},       {"tau_predictor", a.tau_predictor},
       {"sigma_predictor", a.sigma_predictor}};
}

void from_json(const json& j, ArchitectureSpec& a) {
  a.trunk = j.at("trunk").get<NetworkSpec>();
  a.tau_head = j.at("tau_head").get<NetworkSpec>();
  a.sigma_head = j.at("sigma_head").get<NetworkSpec>();
  a.decoder = j.at("decoder").get<NetworkSpec>();
  a.classifier = j.at("classifier").get<NetworkSpec>();
  a.tau_predictor = j.at("tau_predictor").get<NetworkSpec>();
  a.sigma_predictor = j.at("sigma_predictor").get<NetworkSpec>();
}

}  // namespace dicyr
