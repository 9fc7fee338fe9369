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
#include "dicyr/experiments.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dicyr/errors.hpp"
#include "dicyr/image_io.hpp"

#ifndef DICYR_DEFAULT_CONFIG_DIR
#define DICYR_DEFAULT_CONFIG_DIR "configs"
#endif

namespace dicyr {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t stream_of(const std::string& text) { return crc32_bytes(text.data(), text.size()); }

ImageShape shape_of(const Dataset& ds) { return {ds.images.size(1), ds.images.size(2), ds.images.size(3)}; }

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
}

std::string format_double(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// Everything fit() writes except the metrics file itself.
struct RunLayout {
  fs::path root;
  fs::path metrics() const { return root / "metrics.jsonl"; }
  fs::path config() const { return root / "config.effective.json"; }
  fs::path checkpoints() const { return root / "checkpoints"; }
  fs::path epoch_checkpoint(int64_t epoch) const {
    std::ostringstream os;
    os << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
    return checkpoints() / os.str();
  }
  fs::path final_checkpoint() const { return checkpoints() / "final.ckpt"; }
};

// Latest checkpoint by completed-epoch count.
std::optional<fs::path> latest_checkpoint(const RunLayout& layout) {
  if (!fs::exists(layout.checkpoints())) return std::nullopt;
  std::optional<fs::path> best;
  int64_t best_epoch = -1;
  for (const auto& entry : fs::directory_iterator(layout.checkpoints())) {
    if (entry.path().extension() != ".ckpt") continue;
    if (!fs::exists(entry.path().string() + ".json")) continue;
    const auto meta = read_checkpoint_meta(entry.path());
    if (meta.epoch > best_epoch || (meta.epoch == best_epoch && entry.path().filename() == "final.ckpt")) {
      best_epoch = meta.epoch;
      best = entry.path();
    }
  }
  return best;
}

// Keeps the first `epochs` records of a metrics file.
void truncate_metrics(const fs::path& path, int64_t epochs) {
  if (!fs::exists(path)) return;
  std::ifstream in(path);
  std::vector<std::string> kept;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (json::parse(line).at("epoch").get<int64_t>() < epochs) kept.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : kept) out << l << "\n";
}

struct EpochTotals {
  LossBreakdown mean;
  int64_t steps = 0;
};

json breakdown_json(const LossBreakdown& b) {
  json j = json::object();
  for (const auto& [name, v] : b.items()) j[name] = v;
  return j;
}

}  // namespace

Dataset prepare_split(const DataSpec& spec, const fs::path& data_dir, uint64_t seed) {
  Dataset ds = load_dataset(spec.dataset, spec.split, data_dir);
  if (!spec.classes.empty()) ds = filter_classes(ds, spec.classes);
  const uint64_t stream = stream_of(spec.dataset + "/" + spec.split);
  if (spec.limit > 0 && spec.limit < ds.size()) {
    auto rows = std::get<0>(seeded_permutation(ds.size(), seed, stream).slice(0, 0, spec.limit).sort());
    ds = ds.select(rows);
  }
  if (spec.bias) ds = make_biased_mnist(ds, *spec.bias, seed ^ (stream << 1));
  return ds;
}

ExperimentData load_experiment_data(const ExperimentConfig& config) {
  const fs::path dir = config.resolved_data_dir();
  ExperimentData data{prepare_split(config.source, dir, config.seed), std::nullopt,
                      prepare_split(config.test, dir, config.seed), std::nullopt};
  if (config.target) data.target = prepare_split(*config.target, dir, config.seed).unlabeled();
  if (config.source_test) data.source_test = prepare_split(*config.source_test, dir, config.seed);
  if (data.target && shape_of(*data.target) != shape_of(data.source)) {
    throw ConfigError("data.target", "image shape differs from the source images");
  }
  if (shape_of(data.test) != shape_of(data.source)) {
    throw ConfigError("data.test", "image shape differs from the source images");
  }
  return data;
}

ModelBundle build_bundle(const ExperimentConfig& config, const ExperimentData& data) {
  torch::manual_seed(config.seed);
  return build_model(config.resolved_architecture(), shape_of(data.source), data.source.num_classes, config.mode);
}

std::vector<std::string> evaluation_names() {
  return {"accuracy", "target_accuracy", "probes", "retrieval", "swap", "embeddings"};
}

std::vector<std::string> scheduled_evaluations(const ExperimentConfig& config) {
  std::vector<std::string> out{config.mode == Mode::Uda ? "target_accuracy" : "accuracy"};
  if (config.classifier_only) return out;
  if (config.eval.probes) out.push_back("probes");
  if (config.eval.retrieval) out.push_back("retrieval");
  if (config.eval.swap_grid) out.push_back("swap");
  if (config.eval.embeddings) out.push_back("embeddings");
  return out;
}

fs::path find_run_config(const fs::path& checkpoint) {
  for (fs::path dir = checkpoint.parent_path(); !dir.empty(); dir = dir.parent_path()) {
    if (fs::exists(dir / "config.effective.json")) return dir / "config.effective.json";
    if (dir == dir.parent_path()) break;
  }
  throw InvalidArgument("no config.effective.json found above " + checkpoint.string());
}

FitResult fit(const ExperimentConfig& config, const ExperimentData& data, const FitOptions& options) {
  auto log = [&](const std::string& line) {
    if (options.log) options.log(line);
  };
  at::globalContext().setDeterministicAlgorithms(true, false);
  // Denormals creep in late in training and slow CPU kernels several-fold.
  at::globalContext().setFlushDenormal(true);
  const RunLayout layout{config.output_dir};
  fs::create_directories(layout.checkpoints());
  write_text(layout.config(), config_to_json(config).dump(2) + "\n");

  ModelBundle bundle = build_bundle(config, data);
  for (const auto& note : bundle->build_notes()) log("build: " + note);
  const std::string hash = architecture_hash(config, shape_of(data.source), data.source.num_classes);
  Trainer trainer(bundle, config.weights, config.optimizer, config.variant);
  const ActiveTerms terms = config.classifier_only ? ActiveTerms::classifier_only() : ActiveTerms::all();

  int64_t start_epoch = 0;
  if (options.resume) {
    if (auto ckpt = latest_checkpoint(layout)) {
      start_epoch = load_checkpoint(trainer, *ckpt, hash).epoch;
      truncate_metrics(layout.metrics(), start_epoch);
      log("resumed from " + ckpt->string() + " at epoch " + std::to_string(start_epoch));
    } else {
      log("no checkpoint under " + layout.checkpoints().string() + ", starting fresh");
      fs::remove(layout.metrics());
    }
  } else {
    fs::remove(layout.metrics());
  }

  const bool uda = config.mode == Mode::Uda;
  if (uda && !data.target) throw ConfigError("data.target", "required in uda mode");
  const int64_t bs = config.batch_size;
  const int64_t n_source = data.source.size();
  const int64_t n_target = uda ? data.target->size() : 0;
  if (n_source < bs || (uda && n_target < bs)) {
    throw ConfigError("batch_size", "larger than a training split");
  }

  FitResult result;
  result.bundle = bundle;
  result.output_dir = layout.root;
  result.metrics_path = layout.metrics();
  result.final_checkpoint = layout.final_checkpoint();
  result.config_hash = hash;

  json last_record;
  for (int64_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    trainer.apply_lr(epoch);
    EpochTotals totals;
    if (!uda) {
      const BatchIterator it(n_source, bs, config.seed, epoch);
      for (const auto& idx : it.batches()) {
        const auto b = trainer.step_single(data.source.images.index_select(0, idx),
                                           data.source.labels.index_select(0, idx), epoch, terms);
        totals.mean.accumulate(b, totals.steps++);
      }
    } else {
      // One epoch is one pass over the larger split; the smaller one is
      // reshuffled each time it runs out.
      const int64_t steps = std::max(n_source, n_target) / bs;
      const uint64_t target_seed = config.seed ^ 0x7A26E7ull;
      std::vector<torch::Tensor> src, tgt;
      for (int64_t cycle = 0; static_cast<int64_t>(src.size()) < steps; ++cycle) {
        const BatchIterator it(n_source, bs, config.seed, epoch * 1000 + cycle);
        src.insert(src.end(), it.batches().begin(), it.batches().end());
      }
      for (int64_t cycle = 0; static_cast<int64_t>(tgt.size()) < steps; ++cycle) {
        const BatchIterator it(n_target, bs, target_seed, epoch * 1000 + cycle);
        tgt.insert(tgt.end(), it.batches().begin(), it.batches().end());
      }
      for (int64_t s = 0; s < steps; ++s) {
        const auto& is = src[static_cast<std::size_t>(s)];
        const auto& itg = tgt[static_cast<std::size_t>(s)];
        const auto b = trainer.step_uda(data.source.images.index_select(0, is), data.source.labels.index_select(0, is),
                                        data.target->images.index_select(0, itg), epoch, terms);
        totals.mean.accumulate(b, totals.steps++);
      }
    }

    json record = {{"epoch", epoch},
                   {"lr", config.optimizer.lr_at(epoch)},
                   {"beta_c3", schedule_value(config.weights.beta_c3, epoch)}};
    if (uda) record["beta_c1t"] = schedule_value(config.weights.beta_c1t, epoch);
    record["losses"] = breakdown_json(totals.mean);
    const bool last = epoch + 1 == config.epochs;
    if ((epoch + 1) % config.eval_every == 0 || last) {
      const Domain src_domain = uda ? Domain::Source : Domain::Single;
      const Domain test_domain = uda ? Domain::Target : Domain::Single;
      record[uda ? "source_accuracy" : "train_accuracy"] = classification_accuracy(bundle, data.source, src_domain);
      record[uda ? "target_accuracy" : "test_accuracy"] = classification_accuracy(bundle, data.test, test_domain);
      if (data.source_test) {
        record["source_test_accuracy"] = classification_accuracy(bundle, *data.source_test, src_domain);
      }
    }
    {
      std::ofstream out(layout.metrics(), std::ios::app);
      out << record.dump() << "\n";
    }
    std::ostringstream line;
    line << "epoch " << epoch;
    for (const auto& [k, v] : record.items()) {
      if (k == "epoch" || k == "losses") continue;
      line << " " << k << "=" << format_double(v.get<double>());
    }
    for (const auto& [k, v] : totals.mean.items()) line << " " << k << "=" << format_double(v);
    log(line.str());
    last_record = record;
    ++result.epochs_run;

    const CheckpointMeta meta{hash, epoch + 1, config.seed, record.dump()};
    if ((epoch + 1) % config.checkpoint_every == 0) save_checkpoint(trainer, meta, layout.epoch_checkpoint(epoch + 1));
    if (last) save_checkpoint(trainer, meta, layout.final_checkpoint());
  }
  if (result.epochs_run == 0 && !fs::exists(layout.final_checkpoint())) {
    save_checkpoint(trainer, {hash, start_epoch, config.seed, "{}"}, layout.final_checkpoint());
  }

  for (const auto& [k, v] : last_record.items()) {
    if (v.is_number() && k != "epoch") result.final_metrics[k] = v.get<double>();
  }
  const auto evals = scheduled_evaluations(config);
  auto scores = run_evaluations(config, bundle, data, layout.root / "eval", evals);
  for (const auto& [k, v] : scores) result.final_metrics[k] = v;
  return result;
}

FitResult fit(const ExperimentConfig& config, const FitOptions& options) {
  return fit(config, load_experiment_data(config), options);
}

std::map<std::string, double> run_evaluations(const ExperimentConfig& config, ModelBundle& bundle,
                                              const ExperimentData& data, const fs::path& out_dir,
                                              const std::vector<std::string>& metrics) {
  const auto known = evaluation_names();
  const bool uda = bundle->mode() == Mode::Uda;
  for (const auto& m : metrics) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw InvalidArgument("unknown metric '" + m + "'");
    }
    if (m == "target_accuracy" && !uda) {
      throw InvalidArgument("metric 'target_accuracy' needs a domain-adaptation checkpoint; this one is single-domain");
    }
  }
  fs::create_directories(out_dir);
  const Domain src_domain = uda ? Domain::Source : Domain::Single;
  const Domain test_domain = uda ? Domain::Target : Domain::Single;
  std::map<std::string, double> scores;
  json report = json::object();

  for (const auto& m : metrics) {
    if (m == "accuracy") {
      scores["train_accuracy"] = classification_accuracy(bundle, data.source, src_domain);
      scores["test_accuracy"] = classification_accuracy(bundle, data.test, test_domain);
      report["accuracy"] = {{"train", scores["train_accuracy"]}, {"test", scores["test_accuracy"]}};
    } else if (m == "target_accuracy") {
      scores["target_accuracy"] = target_accuracy(bundle, data.test);
      scores["source_accuracy"] = classification_accuracy(bundle, data.source, Domain::Source);
      report["target_accuracy"] = scores["target_accuracy"];
      report["source_accuracy"] = scores["source_accuracy"];
      if (data.source_test) {
        scores["source_test_accuracy"] = classification_accuracy(bundle, *data.source_test, Domain::Source);
        report["source_test_accuracy"] = scores["source_test_accuracy"];
      }
    } else if (m == "probes") {
      Dataset train = data.source;
      Dataset test = data.test;
      const int64_t lim = config.eval.probe_limit;
      if (lim > 0) {
        if (train.size() > lim) train = train.select(std::get<0>(seeded_permutation(train.size(), config.seed, 11).slice(0, 0, lim).sort()));
        if (test.size() > lim) test = test.select(std::get<0>(seeded_permutation(test.size(), config.seed, 12).slice(0, 0, lim).sort()));
      }
      json probes = json::object();
      probes["chance"] = 1.0 / static_cast<double>(train.num_classes);
      for (EmbeddingSpace space : {EmbeddingSpace::Full, EmbeddingSpace::Tau, EmbeddingSpace::Sigma}) {
        ProbeSpec spec = config.eval.probe;
        spec.input = space;
        const std::string key = "probe_" + std::string(to_string(space));
        // UDA runs probe the source-domain embeddings.
        scores[key] = probe_accuracy(bundle, train, test, spec, std::nullopt, uda ? Domain::Source : Domain::Single);
        probes[std::string(to_string(space))]["label"] = scores[key];
        if (train.has_factors() && test.has_factors()) {
          for (int64_t f = 0; f < train.factors.size(1); ++f) {
            const double acc = probe_accuracy(bundle, train, test, spec, f, uda ? Domain::Source : Domain::Single);
            scores[key + "_factor" + std::to_string(f)] = acc;
            probes[std::string(to_string(space))]["factor" + std::to_string(f)] = acc;
          }
        }
      }
      scores["probe_chance"] = probes["chance"].get<double>();
      report["probes"] = probes;
    } else if (m == "retrieval") {
      const Dataset& base = data.test;
      const int64_t corpus_n = std::min(config.eval.retrieval_corpus, base.size());
      const Dataset corpus =
          base.select(std::get<0>(seeded_permutation(base.size(), config.seed, 21).slice(0, 0, corpus_n).sort()));
      const int64_t q = std::min(config.eval.retrieval_queries, corpus_n);
      const auto query_rows = std::get<0>(seeded_permutation(corpus_n, config.seed, 22).slice(0, 0, q).sort());
      json ret = json::object();
      for (EmbeddingSpace space : {EmbeddingSpace::Tau, EmbeddingSpace::Sigma}) {
        const auto r = retrieval(bundle, corpus, query_rows, space, config.eval.retrieval_k, test_domain);
        const std::string name(to_string(space));
        json entry = {{"k", config.eval.retrieval_k}};
        if (r.label_match_rate) {
          scores["retrieval_" + name + "_match"] = *r.label_match_rate;
          entry["label_match_rate"] = *r.label_match_rate;
        }
        std::vector<std::vector<int64_t>> neighbours;
        const auto idx = r.indices.contiguous();
        for (int64_t i = 0; i < idx.size(0); ++i) {
          auto row = idx[i];
          neighbours.emplace_back(row.data_ptr<int64_t>(), row.data_ptr<int64_t>() + row.numel());
        }
        entry["queries"] = std::vector<int64_t>(query_rows.data_ptr<int64_t>(),
                                                query_rows.data_ptr<int64_t>() + query_rows.numel());
        entry["neighbours"] = neighbours;
        ret[name] = entry;
      }
      report["retrieval"] = ret;
    } else if (m == "swap") {
      const int64_t n = std::min<int64_t>(8, data.test.size());
      const auto first = [&](const Dataset& ds) { return ds.images.slice(0, 0, std::min<int64_t>(n, ds.size())); };
      std::vector<std::string> files;
      if (!uda) {
        write_png(tile_grid(swap_grid(bundle, first(data.test), Domain::Single, first(data.test), Domain::Single)),
                  out_dir / "swap_grid.png");
        files.push_back("swap_grid.png");
      } else {
        const auto src = first(data.source);
        const auto tgt = data.target ? first(*data.target) : first(data.test);
        write_png(tile_grid(swap_grid(bundle, src, Domain::Source, src, Domain::Source)), out_dir / "swap_source.png");
        write_png(tile_grid(swap_grid(bundle, tgt, Domain::Target, tgt, Domain::Target)), out_dir / "swap_target.png");
        write_png(tile_grid(swap_grid(bundle, src, Domain::Source, tgt, Domain::Target)),
                  out_dir / "swap_source_to_target.png");
        write_png(tile_grid(swap_grid(bundle, tgt, Domain::Target, src, Domain::Source)),
                  out_dir / "swap_target_to_source.png");
        files = {"swap_source.png", "swap_target.png", "swap_source_to_target.png", "swap_target_to_source.png"};
      }
      report["swap"] = files;
    } else if (m == "embeddings") {
      std::vector<std::pair<Dataset, Domain>> sets;
      if (uda) {
        sets.emplace_back(data.source_test ? *data.source_test : data.source, Domain::Source);
        sets.emplace_back(data.test, Domain::Target);
      } else {
        sets.emplace_back(data.test, Domain::Single);
      }
      const int64_t rows = export_embeddings(bundle, sets, out_dir / "embeddings.csv");
      report["embeddings"] = {{"file", "embeddings.csv"}, {"rows", rows}};
    }
  }
  write_text(out_dir / "evaluation.json", report.dump(2) + "\n");
  return scores;
}

std::vector<std::string> experiment_names() {
  return {"bias_mnist",      "mnist_usps",     "usps_mnist",        "probes_small",      "svhn_mnist",
          "mnist_usps_full", "synsigns_gtsrb", "supervised_svhn", "supervised_shapes"};
}

fs::path default_config_dir() {
  if (const char* env = std::getenv("DICYR_CONFIGS"); env && *env) return env;
  return DICYR_DEFAULT_CONFIG_DIR;
}

fs::path experiment_config_path(const std::string& name, const fs::path& config_dir) {
  const auto names = experiment_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw InvalidArgument("unknown experiment '" + name + "'; available: " + list);
  }
  return config_dir / (name + ".json");
}

namespace {

// Reference numbers and acceptance thresholds shown by `reproduce`.
struct Reference {
  std::string metric;
  std::string label;
  double reference;
  std::optional<double> low;
  std::optional<double> high;
};

std::vector<Reference> references_for(const std::string& name) {
  if (name == "bias_mnist") {
    return {{"baseline_train_accuracy", "vanilla train accuracy", 1.0, 0.99, std::nullopt},
            {"baseline_test_accuracy", "vanilla test accuracy", 0.067, std::nullopt, 0.20},
            {"train_accuracy", "DiCyR train accuracy", 0.984, std::nullopt, std::nullopt},
            {"test_accuracy", "DiCyR test accuracy", 0.957, 0.85, std::nullopt}};
  }
  if (name == "mnist_usps") {
    return {{"target_accuracy", "DiCyR target accuracy (USPS)", 0.987, 0.92, std::nullopt},
            {"baseline_target_accuracy", "source-only target accuracy", 0.781, 0.70, 0.88}};
  }
  if (name == "usps_mnist") {
    return {{"target_accuracy", "DiCyR target accuracy (MNIST)", 0.983, std::nullopt, std::nullopt},
            {"baseline_target_accuracy", "source-only target accuracy", 0.580, std::nullopt, std::nullopt}};
  }
  if (name == "svhn_mnist") {
    return {{"target_accuracy", "DiCyR target accuracy (MNIST)", 0.977, std::nullopt, std::nullopt},
            {"baseline_target_accuracy", "source-only target accuracy", 0.602, std::nullopt, std::nullopt}};
  }
  if (name == "probes_small") {
    return {{"probe_full", "full-feature label probe", 0.98, std::nullopt, std::nullopt},
            {"probe_tau", "task-only label probe", 0.98, std::nullopt, std::nullopt},
            {"probe_sigma", "style-only label probe", 0.17, std::nullopt, std::nullopt},
            {"retrieval_tau_match", "task-space top-k label match", 1.0, 0.80, std::nullopt}};
  }
  return {};
}

}  // namespace

ReproduceResult reproduce(const std::string& name, const fs::path& config_dir,
                          const std::optional<fs::path>& output_dir, const std::optional<uint64_t>& seed,
                          const FitOptions& options) {
  ExperimentConfig config = load_config(experiment_config_path(name, config_dir));
  if (output_dir) config.output_dir = output_dir->string();
  if (seed) config.seed = *seed;
  return run_experiment(config, options);
}

ReproduceResult run_experiment(const ExperimentConfig& config, const FitOptions& options) {
  const std::string& name = config.name;
  const ExperimentData data = load_experiment_data(config);

  ReproduceResult result{fit(config, data, options), std::nullopt, {}, {}};
  result.metrics = result.dicyr.final_metrics;
  if (config.baseline) {
    ExperimentConfig base = config;
    base.name = config.name + "_baseline";
    base.baseline = false;
    base.classifier_only = true;
    base.output_dir = (fs::path(config.output_dir) / "baseline").string();
    FitOptions sub = options;
    if (options.log) sub.log = [&](const std::string& line) { options.log("baseline " + line); };
    result.baseline = fit(base, data, sub);
    for (const auto& [k, v] : result.baseline->final_metrics) result.metrics["baseline_" + k] = v;
  }
  if (config.mode == Mode::Single) {
    // Bias table layout: the same four accuracies for both models.
    if (result.baseline) {
      const auto b = bias_report(result.baseline->bundle, result.dicyr.bundle, data.source, data.test);
      result.metrics["baseline_train_accuracy"] = b.vanilla_train;
      result.metrics["baseline_test_accuracy"] = b.vanilla_test;
      result.metrics["train_accuracy"] = b.dicyr_train;
      result.metrics["test_accuracy"] = b.dicyr_test;
    }
  }

  std::ostringstream os;
  os << name << " (seed " << config.seed << ", " << config.epochs << " epochs)\n";
  os << std::left << std::setw(34) << "metric" << std::setw(10) << "measured" << std::setw(11) << "reference"
     << "target\n";
  json table = json::array();
  for (const auto& ref : references_for(name)) {
    const auto it = result.metrics.find(ref.metric);
    const bool have = it != result.metrics.end();
    std::string target = "-";
    bool pass = true;
    if (ref.low && ref.high) target = format_double(*ref.low, 2) + ".." + format_double(*ref.high, 2);
    else if (ref.low) target = ">= " + format_double(*ref.low, 2);
    else if (ref.high) target = "<= " + format_double(*ref.high, 2);
    if (have) {
      if (ref.low && it->second < *ref.low) pass = false;
      if (ref.high && it->second > *ref.high) pass = false;
    }
    os << std::left << std::setw(34) << ref.label << std::setw(10) << (have ? format_double(it->second) : "n/a")
       << std::setw(11) << format_double(ref.reference, 3) << target;
    if (have && (ref.low || ref.high)) os << (pass ? "  ok" : "  MISS");
    os << "\n";
    table.push_back({{"metric", ref.metric}, {"measured", have ? json(it->second) : json(nullptr)},
                     {"reference", ref.reference}});
  }
  result.report = os.str();
  write_text(fs::path(config.output_dir) / "report.txt", result.report);
  write_text(fs::path(config.output_dir) / "reproduce.json",
             json{{"experiment", name}, {"metrics", result.metrics}, {"table", table}}.dump(2) + "\n");
  return result;
}

}  // namespace dicyr
