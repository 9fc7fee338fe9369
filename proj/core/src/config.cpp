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
#include "dicyr/config.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dicyr/errors.hpp"

namespace dicyr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Walks one JSON object, remembering its path and rejecting unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(key_path(key), "wrong type (got " + std::string(j_.at(key).type_name()) + ")");
    }
  }

  Reader child(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), key_path(key));
  }

  // Marks the key as known; a missing key reads as null.
  const json& raw(const std::string& key) {
    static const json null_value;
    seen_.insert(key);
    return j_.contains(key) ? j_.at(key) : null_value;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(key_path(k), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
auto convert(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path, e.what());
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

ScheduleSpec read_schedule(Reader& parent, const std::string& key, ScheduleSpec fallback) {
  if (!parent.has(key)) {
    parent.raw(key);
    return fallback;
  }
  const json& v = parent.raw(key);
  if (v.is_number()) return ScheduleSpec::constant(v.get<double>());
  Reader r(v, parent.key_path(key));
  ScheduleSpec s = fallback;
  r.read("start", s.start_value);
  r.read("end", s.end_value);
  r.read("ramp_epochs", s.ramp_epochs);
  r.finish();
  if (s.ramp_epochs <= 0) throw ConfigError(r.key_path("ramp_epochs"), "must be positive");
  if (s.end_value < s.start_value) throw ConfigError(r.key_path("end"), "schedule must be non-decreasing");
  if (s.start_value < 0) throw ConfigError(r.key_path("start"), "must be nonnegative");
  return s;
}

DataSpec read_data(Reader r) {
  DataSpec d;
  r.read("dataset", d.dataset);
  r.read("split", d.split);
  r.read("classes", d.classes);
  r.read("limit", d.limit);
  if (r.has("bias")) {
    Reader b = r.child("bias");
    BiasSpec bias;
    std::vector<double> range{bias.intensity_low, bias.intensity_high};
    b.read("intensity", range);
    b.read("invert", bias.invert);
    b.finish();
    if (range.size() != 2 || !(range[0] > 0 && range[0] <= range[1] && range[1] <= 1)) {
      throw ConfigError(b.key_path("intensity"), "expected [low, high] with 0 < low <= high <= 1");
    }
    bias.intensity_low = range[0];
    bias.intensity_high = range[1];
    d.bias = bias;
  } else {
    r.raw("bias");
  }
  r.finish();
  const auto names = dataset_names();
  if (std::find(names.begin(), names.end(), d.dataset) == names.end()) {
    throw ConfigError(r.key_path("dataset"), "unknown dataset '" + d.dataset + "'");
  }
  if (d.split != "train" && d.split != "test") throw ConfigError(r.key_path("split"), "expected train or test");
  if (d.limit < 0) throw ConfigError(r.key_path("limit"), "must be nonnegative");
  return d;
}

json data_to_json(const DataSpec& d) {
  json j = {{"dataset", d.dataset}, {"split", d.split}, {"classes", d.classes}, {"limit", d.limit}};
  if (d.bias) j["bias"] = {{"intensity", {d.bias->intensity_low, d.bias->intensity_high}}, {"invert", d.bias->invert}};
  return j;
}

json schedule_to_json(const ScheduleSpec& s) {
  return {{"start", s.start_value}, {"end", s.end_value}, {"ramp_epochs", s.ramp_epochs}};
}

}  // namespace

ArchitectureSpec ExperimentConfig::resolved_architecture() const {
  ArchitectureSpec a = architecture ? *architecture : dicyr::preset(preset);
  if (normalization) a.override_normalization(*normalization);
  return a;
}

fs::path ExperimentConfig::resolved_data_dir() const {
  return data_dir.empty() ? default_data_dir() : fs::path(data_dir);
}

ExperimentConfig default_config(Mode mode) {
  ExperimentConfig c;
  c.mode = mode;
  c.weights = mode == Mode::Single ? LossWeights::single_domain_defaults() : LossWeights::uda_defaults();
  return c;
}

ExperimentConfig config_from_json(const json& j) {
  Reader root(j, "");
  std::string mode_text = "single";
  root.read("mode", mode_text);
  const Mode mode = convert("mode", [&] { return mode_from_string(mode_text); });
  ExperimentConfig c = default_config(mode);
  root.read("name", c.name);

  {
    Reader data = root.child("data");
    c.source = read_data(data.child("source"));
    if (data.has("target")) c.target = read_data(data.child("target")); else data.raw("target");
    c.test = read_data(data.child("test"));
    if (data.has("source_test")) c.source_test = read_data(data.child("source_test")); else data.raw("source_test");
    data.read("dir", c.data_dir);
    data.finish();
  }
  if (root.has("architecture")) {
    Reader arch = root.child("architecture");
    arch.read("preset", c.preset);
    if (arch.has("normalization")) {
      std::string kind;
      arch.read("normalization", kind);
      c.normalization = convert(arch.key_path("normalization"), [&] { return norm_kind_from_string(kind); });
    } else {
      arch.raw("normalization");
    }
    if (arch.has("networks")) {
      const json& nets = arch.raw("networks");
      c.architecture = convert(arch.key_path("networks"), [&] { return nets.get<ArchitectureSpec>(); });
    } else {
      arch.raw("networks");
    }
    arch.finish();
    if (!c.architecture) convert(arch.key_path("preset"), [&] { return preset(c.preset); });
  } else {
    root.raw("architecture");
  }
  if (root.has("weights")) {
    Reader w = root.child("weights");
    w.read("beta_c2", c.weights.beta_c2);
    c.weights.beta_c3 = read_schedule(w, "beta_c3", c.weights.beta_c3);
    w.read("beta_c4", c.weights.beta_c4);
    c.weights.beta_c1t = read_schedule(w, "beta_c1t", c.weights.beta_c1t);
    w.read("margin", c.weights.margin);
    w.finish();
    if (c.weights.beta_c2 < 0) throw ConfigError(w.key_path("beta_c2"), "must be nonnegative");
    if (c.weights.beta_c4 < 0) throw ConfigError(w.key_path("beta_c4"), "must be nonnegative");
    if (c.weights.margin < 0) throw ConfigError(w.key_path("margin"), "must be nonnegative");
  } else {
    root.raw("weights");
  }
  if (root.has("optimizer")) {
    Reader o = root.child("optimizer");
    o.read("lr", c.optimizer.initial);
    o.read("lr_late", c.optimizer.late);
    o.read("switch_epoch", c.optimizer.switch_epoch);
    o.finish();
    if (c.optimizer.initial <= 0) throw ConfigError(o.key_path("lr"), "must be positive");
    if (c.optimizer.late <= 0) throw ConfigError(o.key_path("lr_late"), "must be positive");
  } else {
    root.raw("optimizer");
  }
  if (root.has("cross_domain_variant")) {
    std::string v;
    root.read("cross_domain_variant", v);
    c.variant = convert("cross_domain_variant", [&] { return cross_domain_variant_from_string(v); });
  } else {
    root.raw("cross_domain_variant");
  }
  root.read("batch_size", c.batch_size);
  root.read("epochs", c.epochs);
  root.read("seed", c.seed);
  root.read("output_dir", c.output_dir);
  root.read("eval_every", c.eval_every);
  root.read("checkpoint_every", c.checkpoint_every);
  root.read("baseline", c.baseline);
  root.read("classifier_only", c.classifier_only);
  if (root.has("eval")) {
    Reader e = root.child("eval");
    e.read("probes", c.eval.probes);
    e.read("retrieval", c.eval.retrieval);
    e.read("swap_grid", c.eval.swap_grid);
    e.read("embeddings", c.eval.embeddings);
    e.read("probe_limit", c.eval.probe_limit);
    e.read("retrieval_corpus", c.eval.retrieval_corpus);
    e.read("retrieval_queries", c.eval.retrieval_queries);
    e.read("retrieval_k", c.eval.retrieval_k);
    if (e.has("probe")) {
      Reader p = e.child("probe");
      p.read("hidden_units", c.eval.probe.hidden_units);
      p.read("epochs", c.eval.probe.epochs);
      p.read("lr", c.eval.probe.lr);
      p.read("batch_size", c.eval.probe.batch_size);
      p.read("seed", c.eval.probe.seed);
      p.finish();
    } else {
      e.raw("probe");
    }
    e.finish();
    if (c.eval.retrieval_k < 1) throw ConfigError(e.key_path("retrieval_k"), "must be at least 1");
    if (c.eval.retrieval_corpus <= c.eval.retrieval_k) {
      throw ConfigError(e.key_path("retrieval_corpus"), "must exceed retrieval_k");
    }
  } else {
    root.raw("eval");
  }
  root.finish();

  if (c.batch_size < 2) throw ConfigError("batch_size", "must be at least 2");
  if (c.epochs < 0) throw ConfigError("epochs", "must be nonnegative");
  if (c.eval_every < 1) throw ConfigError("eval_every", "must be at least 1");
  if (c.checkpoint_every < 1) throw ConfigError("checkpoint_every", "must be at least 1");
  if (c.output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
  if (c.mode == Mode::Uda && !c.target) throw ConfigError("data.target", "required in uda mode");
  if (c.mode == Mode::Single && c.target) throw ConfigError("data.target", "only allowed in uda mode");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

json config_to_json(const ExperimentConfig& c) {
  json data = {{"source", data_to_json(c.source)}, {"test", data_to_json(c.test)}, {"dir", c.data_dir}};
  if (c.target) data["target"] = data_to_json(*c.target);
  if (c.source_test) data["source_test"] = data_to_json(*c.source_test);
  json arch = {{"preset", c.preset}, {"networks", c.resolved_architecture()}};
  if (c.normalization) arch["normalization"] = to_string(*c.normalization);
  return {
      {"name", c.name},
      {"mode", to_string(c.mode)},
      {"data", data},
      {"architecture", arch},
      {"weights",
       {{"beta_c2", c.weights.beta_c2},
        {"beta_c3", schedule_to_json(c.weights.beta_c3)},
        {"beta_c4", c.weights.beta_c4},
        {"beta_c1t", schedule_to_json(c.weights.beta_c1t)},
        {"margin", c.weights.margin}}},
      {"optimizer",
       {{"lr", c.optimizer.initial}, {"lr_late", c.optimizer.late}, {"switch_epoch", c.optimizer.switch_epoch}}},
      {"cross_domain_variant", to_string(c.variant)},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"eval_every", c.eval_every},
      {"checkpoint_every", c.checkpoint_every},
      {"baseline", c.baseline},
      {"classifier_only", c.classifier_only},
      {"eval",
       {{"probes", c.eval.probes},
        {"retrieval", c.eval.retrieval},
        {"swap_grid", c.eval.swap_grid},
        {"embeddings", c.eval.embeddings},
        {"probe_limit", c.eval.probe_limit},
        {"retrieval_corpus", c.eval.retrieval_corpus},
        {"retrieval_queries", c.eval.retrieval_queries},
        {"retrieval_k", c.eval.retrieval_k},
        {"probe",
         {{"hidden_units", c.eval.probe.hidden_units},
          {"epochs", c.eval.probe.epochs},
          {"lr", c.eval.probe.lr},
          {"batch_size", c.eval.probe.batch_size},
          {"seed", c.eval.probe.seed}}}}},
  };
}

std::string architecture_hash(const ExperimentConfig& c, ImageShape shape, int64_t num_classes) {
  json j = {{"networks", c.resolved_architecture()},
            {"mode", to_string(c.mode)},
            {"input", {shape.channels, shape.height, shape.width}},
            {"classes", num_classes}};
  const std::string text = j.dump();
  std::ostringstream os;
  os << std::hex << std::setw(8) << std::setfill('0') << crc32_bytes(text.data(), text.size());
  return os.str();
}

}  // namespace dicyr
