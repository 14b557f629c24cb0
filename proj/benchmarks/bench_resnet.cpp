// Copyright 2026 The fer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <vector>

#include "fer/model.hpp"
#include "fer/ops.hpp"

namespace {

fer::Tensor<float> batch(std::size_t n, fer::Rng& rng) {
  fer::Tensor<float> t({n, 1, 48, 48});
  for (float& v : t.values()) v = static_cast<float>(rng.uniform());
  return t;
}

void BM_ResNetInfer(benchmark::State& state) {
  fer::Rng rng(3);
  const auto net = fer::ResNet<float>::build(fer::ResNetConfig{}, rng);
  const auto x = batch(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(net.infer(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ResNetInfer)->Arg(1)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_ResNetTrainStep(benchmark::State& state) {
  fer::Rng rng(4);
  auto net = fer::ResNet<float>::build(fer::ResNetConfig{}, rng);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const auto x = batch(n, rng);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 8);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fer::loss_with_l2(net, x, labels));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ResNetTrainStep)->Arg(16)->Unit(benchmark::kMillisecond)->Iterations(3);

}  // namespace
