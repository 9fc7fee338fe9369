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
#include "dicyr/evaluation.hpp"

#include <fstream>
#include <iomanip>

#include <ATen/CPUGeneratorImpl.h>

#include "dicyr/errors.hpp"

namespace dicyr {

std::string_view to_string(EmbeddingSpace space) {
  switch (space) {
    case EmbeddingSpace::Tau: return "tau";
    case EmbeddingSpace::Sigma: return "sigma";
    case EmbeddingSpace::Full: return "full";
  }
  return "full";
}

EmbeddingSpace embedding_space_from_string(std::string_view text) {
  if (text == "tau") return EmbeddingSpace::Tau;
  if (text == "sigma") return EmbeddingSpace::Sigma;
  if (text == "full") return EmbeddingSpace::Full;
  throw InvalidArgument("unknown embedding space '" + std::string(text) + "' (expected tau, sigma or full)");
}

namespace {

// Restores train/eval flags and the global generator on scope exit.
class FrozenScope {
 public:
  explicit FrozenScope(ModelBundle& bundle) : bundle_(bundle), was_training_(bundle->is_training()) { bundle_->eval(); }
  ~FrozenScope() { bundle_->train(was_training_); }

 private:
  ModelBundle& bundle_;
  bool was_training_;
};

class RngGuard {
 public:
  RngGuard() : state_(at::detail::getDefaultCPUGenerator().get_state()) {}
  ~RngGuard() {
    auto gen = at::detail::getDefaultCPUGenerator();
    std::lock_guard<std::mutex> lock(gen.mutex());
    gen.set_state(state_);
  }

 private:
  torch::Tensor state_;
};

}  // namespace

LatentPair compute_embeddings(ModelBundle& bundle, const torch::Tensor& images, Domain domain, int64_t batch_size) {
  FrozenScope frozen(bundle);
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> taus, sigmas;
  for (int64_t b = 0; b < images.size(0); b += batch_size) {
    auto lat = encode(bundle, images.narrow(0, b, std::min(batch_size, images.size(0) - b)), domain);
    taus.push_back(lat.tau);
    sigmas.push_back(lat.sigma);
  }
  if (taus.empty()) {
    return {torch::empty({0, bundle->tau_dim()}), torch::empty({0, bundle->sigma_dim()})};
  }
  return {torch::cat(taus), torch::cat(sigmas)};
}

torch::Tensor select_space(const LatentPair& latent, EmbeddingSpace space) {
  switch (space) {
    case EmbeddingSpace::Tau: return latent.tau;
    case EmbeddingSpace::Sigma: return latent.sigma;
    case EmbeddingSpace::Full: return torch::cat({latent.tau, latent.sigma}, 1);
  }
  return latent.tau;
}

double probe_accuracy_on_features(const torch::Tensor& train_x, const torch::Tensor& train_y,
                                  const torch::Tensor& test_x, const torch::Tensor& test_y, int64_t num_classes,
                                  const ProbeSpec& spec) {
  if (train_x.size(0) != train_y.size(0) || test_x.size(0) != test_y.size(0)) {
    throw InvalidArgument("probe: features and targets must have the same number of rows");
  }
  if (train_x.size(0) < 2 || spec.batch_size < 1 || spec.epochs < 1) {
    throw InvalidArgument("probe: need at least two training rows, a positive batch size and epoch count");
  }
  RngGuard rng;
  torch::manual_seed(spec.seed);
  const int64_t dim = train_x.size(1);
  torch::nn::Sequential probe(torch::nn::Linear(dim, spec.hidden_units), torch::nn::ReLU(),
                              torch::nn::Linear(spec.hidden_units, num_classes));
  torch::optim::Adam opt(probe->parameters(), torch::optim::AdamOptions(spec.lr));
  auto x = train_x.detach().to(torch::kFloat32);
  auto y = train_y.to(torch::kInt64);
  const int64_t n = x.size(0);
  const int64_t bs = std::min(spec.batch_size, n);
  for (int64_t e = 0; e < spec.epochs; ++e) {
    BatchIterator it(n, std::max<int64_t>(bs, 2), spec.seed, e);
    for (const auto& idx : it.batches()) {
      opt.zero_grad();
      auto loss = torch::nn::functional::cross_entropy(probe->forward(x.index_select(0, idx)), y.index_select(0, idx));
      loss.backward();
      opt.step();
    }
  }
  torch::NoGradGuard no_grad;
  probe->eval();
  auto pred = probe->forward(test_x.detach().to(torch::kFloat32)).argmax(1);
  return pred.eq(test_y.to(torch::kInt64)).to(torch::kFloat64).mean().item<double>();
}

double probe_accuracy(ModelBundle& bundle, const Dataset& train, const Dataset& test, const ProbeSpec& spec,
                      std::optional<int64_t> factor, Domain domain) {
  torch::Tensor ytr, yte;
  int64_t classes = 0;
  if (factor) {
    if (!train.has_factors() || !test.has_factors()) {
      throw InvalidArgument("probe: factor " + std::to_string(*factor) + " requested but the dataset has no factors");
    }
    if (*factor < 0 || *factor >= train.factors.size(1)) {
      throw InvalidArgument("probe: factor index out of range");
    }
    ytr = train.factors.select(1, *factor);
    yte = test.factors.select(1, *factor);
    classes = std::max(ytr.max().item<int64_t>(), yte.max().item<int64_t>()) + 1;
  } else {
    if (!train.has_labels() || !test.has_labels()) throw InvalidArgument("probe: labels required");
    ytr = train.labels;
    yte = test.labels;
    classes = train.num_classes;
  }
  auto ftr = select_space(compute_embeddings(bundle, train.images, domain), spec.input);
  auto fte = select_space(compute_embeddings(bundle, test.images, domain), spec.input);
  return probe_accuracy_on_features(ftr, ytr, fte, yte, classes, spec);
}

RetrievalReport retrieve(const torch::Tensor& queries, const torch::Tensor& corpus, int64_t k,
                         const torch::Tensor& exclude, const torch::Tensor& query_labels,
                         const torch::Tensor& corpus_labels) {
  if (!corpus.defined() || corpus.size(0) == 0) throw InvalidArgument("retrieval: empty corpus");
  if (queries.dim() != 2 || corpus.dim() != 2 || queries.size(1) != corpus.size(1)) {
    throw InvalidArgument("retrieval: queries and corpus must be [Q, D] and [N, D]");
  }
  const int64_t n = corpus.size(0);
  const bool excluding = exclude.defined();
  if (k < 1 || k >= n || (!excluding && k > n)) {
    throw InvalidArgument("retrieval: k must satisfy 1 <= k < corpus size");
  }
  auto q = queries.detach().to(torch::kFloat64);
  auto c = corpus.detach().to(torch::kFloat64);
  // Direct differences, no |a|^2 + |b|^2 - 2ab expansion.
  auto dist = torch::cdist(q, c, 2.0, /*compute_mode=*/2);
  if (excluding) {
    auto ex = exclude.to(torch::kInt64);
    for (int64_t i = 0; i < q.size(0); ++i) {
      const int64_t e = ex[i].item<int64_t>();
      if (e >= 0) dist[i][e] = std::numeric_limits<double>::infinity();
    }
  }
  auto [sorted, order] = torch::sort(dist, /*stable=*/true, /*dim=*/1, /*descending=*/false);
  RetrievalReport r;
  r.indices = order.narrow(1, 0, k).contiguous();
  r.distances = sorted.narrow(1, 0, k).contiguous();
  if (query_labels.defined() && corpus_labels.defined()) {
    auto neighbour_labels = corpus_labels.to(torch::kInt64).index({r.indices});
    auto match = neighbour_labels.eq(query_labels.to(torch::kInt64).unsqueeze(1));
    r.label_match_rate = match.to(torch::kFloat64).mean().item<double>();
  }
  return r;
}

RetrievalReport retrieval(ModelBundle& bundle, const Dataset& corpus, const torch::Tensor& query_rows,
                          EmbeddingSpace space, int64_t k, Domain domain) {
  if (corpus.size() == 0) throw InvalidArgument("retrieval: empty corpus");
  auto features = select_space(compute_embeddings(bundle, corpus.images, domain), space);
  auto rows = query_rows.to(torch::kInt64);
  auto q = features.index_select(0, rows);
  torch::Tensor ql, cl;
  if (corpus.has_labels()) {
    ql = corpus.labels.index_select(0, rows);
    cl = corpus.labels;
  }
  return retrieve(q, features, k, rows, ql, cl);
}

torch::Tensor swap_grid(ModelBundle& bundle, const torch::Tensor& task_images, Domain task_domain,
                        const torch::Tensor& style_images, Domain style_domain) {
  FrozenScope frozen(bundle);
  torch::NoGradGuard no_grad;
  auto task = encode(bundle, task_images, task_domain);
  auto style = encode(bundle, style_images, style_domain);
  const int64_t n = task_images.size(0), m = style_images.size(0);
  const auto s = bundle->input_shape();
  auto grid = torch::ones({n + 1, m + 1, s.channels, s.height, s.width});
  for (int64_t j = 0; j < m; ++j) grid[0][j + 1].copy_(style_images[j]);
  for (int64_t i = 0; i < n; ++i) {
    grid[i + 1][0].copy_(task_images[i]);
    auto tau = task.tau[i].unsqueeze(0).expand({m, -1});
    auto cells = decode(bundle, {tau, style.sigma}, style_domain);
    grid[i + 1].narrow(0, 1, m).copy_(cells);
  }
  return grid;
}

double classification_accuracy(ModelBundle& bundle, const Dataset& ds, Domain domain, int64_t batch_size) {
  if (!ds.has_labels()) throw InvalidArgument("accuracy needs labels");
  if (ds.size() == 0) return 0.0;
  FrozenScope frozen(bundle);
  torch::NoGradGuard no_grad;
  int64_t correct = 0;
  for (int64_t b = 0; b < ds.size(); b += batch_size) {
    const int64_t len = std::min(batch_size, ds.size() - b);
    auto lat = encode(bundle, ds.images.narrow(0, b, len), domain);
    auto pred = classifier_logits(bundle, lat.tau).argmax(1);
    correct += pred.eq(ds.labels.narrow(0, b, len)).sum().item<int64_t>();
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double target_accuracy(ModelBundle& bundle, const Dataset& target_test) {
  return classification_accuracy(bundle, target_test, Domain::Target);
}

BiasReport bias_report(ModelBundle& vanilla, ModelBundle& dicyr, const Dataset& biased_train,
                       const Dataset& biased_test) {
  BiasReport r;
  r.vanilla_train = classification_accuracy(vanilla, biased_train, Domain::Single);
  r.vanilla_test = classification_accuracy(vanilla, biased_test, Domain::Single);
  r.dicyr_train = classification_accuracy(dicyr, biased_train, Domain::Single);
  r.dicyr_test = classification_accuracy(dicyr, biased_test, Domain::Single);
  return r;
}

int64_t export_embeddings(ModelBundle& bundle, const std::vector<std::pair<Dataset, Domain>>& sets,
                          const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const int64_t d = bundle->tau_dim();
  for (int64_t i = 0; i < d; ++i) out << "tau_" << i << ",";
  out << "label,domain\n";
  out << std::setprecision(9);
  int64_t rows = 0;
  for (const auto& [ds, domain] : sets) {
    auto tau = compute_embeddings(bundle, ds.images, domain).tau.to(torch::kFloat64).contiguous();
    const double* p = tau.data_ptr<double>();
    for (int64_t r = 0; r < tau.size(0); ++r) {
      for (int64_t c = 0; c < d; ++c) out << p[r * d + c] << ",";
      out << (ds.has_labels() ? ds.labels[r].item<int64_t>() : -1) << "," << to_string(domain) << "\n";
      ++rows;
    }
  }
  return rows;
}

}  // namespace dicyr
