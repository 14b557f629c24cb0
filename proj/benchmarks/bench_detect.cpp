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

#include <string>

#include "fer/detect.hpp"
#include "fer/image.hpp"

namespace {

const std::string kFixtures = FER_FIXTURES_DIR;

void BM_IntegralImage(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const fer::Image gray(side, side, 1, 97);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fer::IntegralImage(fer::gray_view(gray)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(side * side));
}
BENCHMARK(BM_IntegralImage)->Arg(160)->Arg(640);

void BM_DetectFixtureFace(benchmark::State& state) {
  const auto cascade = fer::load_cascade(kFixtures + "/haarcascade_frontalface_default.xml");
  const fer::Image gray = fer::to_gray(fer::load_image(kFixtures + "/face.png"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(fer::detect_multiscale(cascade, fer::gray_view(gray)));
  }
}
BENCHMARK(BM_DetectFixtureFace)->Unit(benchmark::kMillisecond);

// 640x480 upscaled fixture: the size of a typical webcam frame.
void BM_DetectVgaFrame(benchmark::State& state) {
  const auto cascade = fer::load_cascade(kFixtures + "/haarcascade_frontalface_default.xml");
  const fer::Image face = fer::to_gray(fer::load_image(kFixtures + "/face.png"));
  fer::Image frame(640, 480, 1, 120);
  for (std::size_t y = 0; y < face.height; ++y)
    for (std::size_t x = 0; x < face.width; ++x) frame.at(x + 200, y + 150) = face.at(x, y);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fer::detect_multiscale(cascade, fer::gray_view(frame)));
  }
}
BENCHMARK(BM_DetectVgaFrame)->Unit(benchmark::kMillisecond);

}  // namespace
