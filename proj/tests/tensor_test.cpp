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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fer/error.hpp"
#include "fer/gradcheck.hpp"
#include "fer/optim.hpp"
#include "fer/rng.hpp"
#include "fer/tensor.hpp"

namespace fer {
namespace {

// ---------------------------------------------------------------- tensor --

TEST(Tensor, DefaultIsEmpty) {
  const Tensor<float> t;
  EXPECT_TRUE(t.empty());
  EXPECT_EQ(t.rank(), 0u);
  EXPECT_EQ(t.size(), 0u);
}

TEST(Tensor, ShapeAndFill) {
  const Tensor<float> t({2, 3, 4, 5}, 1.5f);
  EXPECT_EQ(t.size(), 120u);
  EXPECT_EQ(t.rank(), 4u);
  EXPECT_EQ(t.dim(2), 4u);
  for (float v : t.values()) EXPECT_EQ(v, 1.5f);
}

TEST(Tensor, NchwIndexing) {
  Tensor<int> t({2, 3, 4, 5});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<int>(i);
  EXPECT_EQ(t.at(1, 2, 3, 4), ((1 * 3 + 2) * 4 + 3) * 5 + 4);
  EXPECT_EQ(t.at(0, 1, 0, 0), 20);
}

TEST(Tensor, ZeroDimensionThrows) {
  EXPECT_THROW(Tensor<float>({2, 0, 3}), InvalidArgument);
}

TEST(Tensor, DataLengthMismatchThrows) {
  EXPECT_THROW(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}),
               InvalidArgument);
}

TEST(Tensor, ReshapeKeepsDataAndChecksSize) {
  const Tensor<double> t({2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Tensor<double> r = t.reshaped({3, 2});
  EXPECT_EQ(r.shape(), (Shape{3, 2}));
  EXPECT_EQ(r[5], 6.0);
  EXPECT_THROW(t.reshaped({4, 2}), InvalidArgument);
}

TEST(Tensor, CastPreservesValues) {
  const Tensor<double> t({3}, std::vector<double>{0.5, -2.0, 3.25});
  const Tensor<float> f = t.cast<float>();
  EXPECT_EQ(f[0], 0.5f);
  EXPECT_EQ(f[1], -2.0f);
  EXPECT_EQ(f[2], 3.25f);
}

TEST(Tensor, AllFiniteDetectsNanAndInf) {
  Tensor<float> t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
  t[1] = INFINITY;
  EXPECT_FALSE(t.all_finite());
}

TEST(Tensor, GradBufferIsOptional) {
  Tensor<float> t({4}, 2.0f);
  EXPECT_FALSE(t.has_grad());
  t.enable_grad();
  ASSERT_TRUE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 4u);
  t.grad()[2] = 7.0f;
  t.zero_grad();
  EXPECT_EQ(t.grad()[2], 0.0f);
}

TEST(Tensor, ShapeString) {
  EXPECT_EQ(shape_string({2, 3, 48}), "[2,3,48]");
}

// ------------------------------------------------------------------- rng --

TEST(Rng, EngineMatchesStandardSequence) {
  // The 10000th output of a default-seeded mt19937_64 is fixed by the
  // standard.
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  EXPECT_EQ(v, 9981545732273789042ULL);
}

TEST(Rng, SameSeedSameStream) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.uniform(), b.uniform());
    ASSERT_EQ(a.normal(), b.normal());
    ASSERT_EQ(a.uniform_int(-3, 9), b.uniform_int(-3, 9));
  }
}

TEST(Rng, DifferentSeedsDiffer) {
  Rng a(1), b(2);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(Rng, UniformUsesTop53Bits) {
  std::mt19937_64 ref(9);
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(rng.uniform(), static_cast<double>(ref() >> 11) / 9007199254740992.0);
  }
}

TEST(Rng, UniformIntStaysInRangeAndCoversIt) {
  Rng rng(3);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = rng.uniform_int(-3, 3);
    ASSERT_GE(v, -3);
    ASSERT_LE(v, 3);
    ++seen[static_cast<std::size_t>(v + 3)];
  }
  for (int c : seen) {
    EXPECT_GT(c, 850);
    EXPECT_LT(c, 1150);
  }
  EXPECT_THROW(rng.uniform_int(2, 1), InvalidArgument);
}

TEST(Rng, NormalMomentsMatch) {
  Rng rng(4);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = rng.normal(2.0, 3.0);
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 2.0, 0.03);
  EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 3.0, 0.03);
}

TEST(Rng, BernoulliRate) {
  Rng rng(5);
  int hits = 0;
  for (int i = 0; i < 100000; ++i) hits += rng.bernoulli(0.3);
  EXPECT_NEAR(hits / 100000.0, 0.3, 0.01);
}

std::uint64_t reference_splitmix(std::uint64_t x) {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

TEST(Rng, SplitSeedsChildFromSplitMix) {
  EXPECT_EQ(reference_splitmix(0), 0xe220a8397b1dcdafULL);
  Rng parent(11);
  std::mt19937_64 ref(11);
  const Rng child = parent.split();
  EXPECT_EQ(child.seed(), reference_splitmix(ref()));
  // The parent advanced by exactly one draw.
  EXPECT_EQ(parent.next_u64(), ref());
}

TEST(Rng, SplitIsDeterministic) {
  Rng a(12), b(12);
  Rng ca = a.split(), cb = b.split();
  for (int i = 0; i < 100; ++i) ASSERT_EQ(ca.next_u64(), cb.next_u64());
}

// ------------------------------------------------------------------- sgd --

TEST(Sgd, FirstStepIsPlainGradientStep) {
  Param<double> p("w", Tensor<double>({2}, std::vector<double>{1.0, -2.0}), false);
  p.grad = Tensor<double>({2}, std::vector<double>{0.5, 0.25});
  Param<double>* params[] = {&p};
  SgdState<double> state;
  sgd_step<double>(params, {0.1, 0.9, 0.0}, state);
  EXPECT_DOUBLE_EQ(p.value[0], 1.0 - 0.1 * 0.5);
  EXPECT_DOUBLE_EQ(p.value[1], -2.0 - 0.1 * 0.25);
}

TEST(Sgd, TwoStepMomentumRecurrence) {
  const double lr = 0.05, mu = 0.9;
  const double g1 = 0.4, g2 = -0.1;
  Param<double> p("w", Tensor<double>({1}, 3.0), false);
  Param<double>* params[] = {&p};
  SgdState<double> state;
  p.grad[0] = g1;
  sgd_step<double>(params, {lr, mu, 0.0}, state);
  p.grad[0] = g2;
  sgd_step<double>(params, {lr, mu, 0.0}, state);
  // v1 = g1, v2 = mu*g1 + g2
  EXPECT_NEAR(p.value[0], 3.0 - lr * g1 - lr * (mu * g1 + g2), 1e-15);
}

TEST(Sgd, WeightDecayOnlyOnFlaggedParams) {
  Param<double> decayed("k", Tensor<double>({1}, 2.0), true);
  Param<double> plain("b", Tensor<double>({1}, 2.0), false);
  Param<double>* params[] = {&decayed, &plain};
  SgdState<double> state;
  sgd_step<double>(params, {0.1, 0.0, 0.5}, state);
  EXPECT_DOUBLE_EQ(decayed.value[0], 2.0 - 0.1 * 0.5 * 2.0);
  EXPECT_DOUBLE_EQ(plain.value[0], 2.0);
}

TEST(Sgd, ClosedFormConstantGradient) {
  // With a constant gradient g, v_t = g (1 - mu^t) / (1 - mu) and the
  // displacement after T steps is lr * sum_t v_t.
  const double lr = 0.01, mu = 0.5, g = 2.0;
  Param<double> p("w", Tensor<double>({1}, 0.0), false);
  Param<double>* params[] = {&p};
  SgdState<double> state;
  double expected = 0.0;
  for (int t = 1; t <= 20; ++t) {
    p.grad[0] = g;
    sgd_step<double>(params, {lr, mu, 0.0}, state);
    expected -= lr * g * (1.0 - std::pow(mu, t)) / (1.0 - mu);
  }
  EXPECT_NEAR(p.value[0], expected, 1e-12);
}

TEST(Sgd, QuadraticConverges) {
  Param<double> p("w", Tensor<double>({3}, std::vector<double>{4.0, -3.0, 1.0}),
                  false);
  Param<double>* params[] = {&p};
  SgdState<double> state;
  for (int i = 0; i < 300; ++i) {
    for (std::size_t j = 0; j < 3; ++j) p.grad[j] = 2.0 * p.value[j];
    sgd_step<double>(params, {0.05, 0.9, 0.0}, state);
  }
  for (double v : p.value.values()) EXPECT_NEAR(v, 0.0, 1e-6);
}

// ------------------------------------------------------------- gradcheck --

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 3.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
}

TEST(GradCheck, AcceptsCorrectGradient) {
  const Objective f = [](std::span<const double> x) {
    return std::sin(x[0]) * x[1] + x[2] * x[2] * x[2];
  };
  const std::vector<double> x{0.3, -1.2, 0.7};
  const std::vector<double> g{std::cos(0.3) * -1.2, std::sin(0.3), 3 * 0.49};
  EXPECT_LE(finite_diff_check(f, x, g), 1e-8);
}

TEST(GradCheck, RejectsWrongGradient) {
  const Objective f = [](std::span<const double> x) { return x[0] * x[0]; };
  const std::vector<double> x{1.0};
  const std::vector<double> wrong{2.2};
  EXPECT_GT(finite_diff_check(f, x, wrong), 1e-2);
}

TEST(GradCheck, ProbesOnlyRequestedIndices) {
  const Objective f = [](std::span<const double> x) { return x[0] + x[1]; };
  const std::vector<double> x{0.0, 0.0};
  const std::vector<double> g{1.0, 99.0};
  const std::vector<std::size_t> idx{0};
  EXPECT_LE(finite_diff_check(f, x, g, 1e-5, idx), 1e-9);
}

TEST(GradCheck, NumericGradientOfQuadratic) {
  const Objective f = [](std::span<const double> x) {
    return 3 * x[0] * x[0] - x[0] * x[1];
  };
  const std::vector<double> x{1.0, 2.0};
  const auto g = numeric_gradient(f, x);
  EXPECT_NEAR(g[0], 6.0 - 2.0, 1e-8);
  EXPECT_NEAR(g[1], -1.0, 1e-8);
}

}  // namespace
}  // namespace fer
