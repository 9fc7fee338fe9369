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
#include <benchmark/benchmark.h>
#include <torch/torch.h>

#include "dicyr/evaluation.hpp"
#include "dicyr/network_spec.hpp"
#include "dicyr/networks.hpp"
#include "dicyr/training.hpp"

namespace {

using namespace dicyr;

const ImageShape kDigits{3, 28, 28};

void BM_EncodeDeskDigits(benchmark::State& state) {
  torch::manual_seed(0);
  auto bundle = build_model(preset("desk_digits"), kDigits, 10, Mode::Single);
  bundle->eval();
  auto x = torch::rand({state.range(0), 3, 28, 28});
  torch::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(encode(bundle, x, Domain::Single).tau);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncodeDeskDigits)->Arg(64)->Arg(256);

void BM_TrainStepSingle(benchmark::State& state) {
  torch::manual_seed(0);
  Trainer trainer(build_model(preset("desk_digits"), kDigits, 10, Mode::Single), {}, {});
  auto x = torch::rand({64, 3, 28, 28});
  auto y = torch::randint(0, 10, {64}, torch::kLong);
  for (auto _ : state) trainer.step_single(x, y, 5);
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStepSingle)->Unit(benchmark::kMillisecond);

void BM_TrainStepUda(benchmark::State& state) {
  torch::manual_seed(0);
  Trainer trainer(build_model(preset("desk_digits"), kDigits, 10, Mode::Uda), LossWeights::uda_defaults(), {});
  auto xs = torch::rand({128, 3, 28, 28});
  auto ys = torch::randint(0, 10, {128}, torch::kLong);
  auto xt = torch::rand({128, 3, 28, 28});
  for (auto _ : state) trainer.step_uda(xs, ys, xt, 5);
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_TrainStepUda)->Unit(benchmark::kMillisecond);

void BM_Retrieve(benchmark::State& state) {
  torch::manual_seed(0);
  auto corpus = torch::randn({state.range(0), 32});
  auto queries = corpus.slice(0, 0, 100);
  auto exclude = torch::arange(100);
  for (auto _ : state) benchmark::DoNotOptimize(retrieve(queries, corpus, 5, exclude).indices);
}
BENCHMARK(BM_Retrieve)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
