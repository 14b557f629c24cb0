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

#include "fer/ops.hpp"
#include "fer/rng.hpp"

namespace {

fer::Tensor<float> random_tensor(const fer::Shape& shape, fer::Rng& rng) {
  fer::Tensor<float> t(shape);
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return t;
}

// Args: channels in/out, spatial size, stride.
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  const auto stride = static_cast<std::size_t>(state.range(2));
  fer::Rng rng(1);
  const auto x = random_tensor({16, c, hw, hw}, rng);
  const auto k = random_tensor({c, c, 3, 3}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fer::conv2d_forward(x, k, fer::Tensor<float>(), stride, 1));
  }
  const double oh = static_cast<double>((hw + 2 - 3) / stride + 1);
  state.counters["GFLOP/s"] = benchmark::Counter(
      2.0 * 16 * c * c * 9 * oh * oh * static_cast<double>(state.iterations()) / 1e9,
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Conv2dForward)->Args({64, 48, 1})->Args({128, 24, 1})->Args({256, 12, 1})
    ->Args({64, 48, 2})->Unit(benchmark::kMillisecond);

void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  fer::Rng rng(2);
  const auto x = random_tensor({16, c, hw, hw}, rng);
  const auto k = random_tensor({c, c, 3, 3}, rng);
  const auto g = random_tensor({16, c, hw, hw}, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fer::conv2d_backward(g, x, k, false, 1, 1));
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 48})->Args({256, 12})->Unit(benchmark::kMillisecond);

}  // namespace
