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

#include "fer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "fer/error.hpp"

namespace fer {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double central_difference(const Objective& f, std::vector<double>& x,
                          std::size_t i, double h) {
  const double saved = x[i];
  x[i] = saved + h;
  const double up = f(x);
  x[i] = saved - h;
  const double down = f(x);
  x[i] = saved;
  return (up - down) / (2.0 * h);
}

}  // namespace

double finite_diff_check(const Objective& f, std::span<const double> point,
                         std::span<const double> analytic, double h,
                         std::span<const std::size_t> indices) {
  if (analytic.size() != point.size()) {
    throw InvalidArgument("finite_diff_check: gradient length mismatch");
  }
  if (!(h > 0.0)) throw InvalidArgument("finite_diff_check: h must be > 0");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  auto probe = [&](std::size_t i) {
    if (i >= x.size()) throw InvalidArgument("finite_diff_check: bad index");
    worst = std::max(worst,
                     relative_error(analytic[i], central_difference(f, x, i, h)));
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) probe(i);
  } else {
    for (std::size_t i : indices) probe(i);
  }
  return worst;
}

std::vector<double> numeric_gradient(const Objective& f,
                                     std::span<const double> point, double h) {
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    g[i] = central_difference(f, x, i, h);
  }
  return g;
}

}  // namespace fer
