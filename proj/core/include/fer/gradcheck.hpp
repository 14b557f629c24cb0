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

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace fer {

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

/// Scalar objective over a flat parameter vector.
using Objective = std::function<double(std::span<const double>)>;

/// Central-difference check of `analytic` (the claimed gradient of `f` at
/// `point`). Only the coordinates in `indices` are probed; an empty list
/// probes all of them. Returns the largest relative error seen.
double finite_diff_check(const Objective& f, std::span<const double> point,
                         std::span<const double> analytic, double h = 1e-5,
                         std::span<const std::size_t> indices = {});

/// Numeric gradient by central differences, for every coordinate.
std::vector<double> numeric_gradient(const Objective& f,
                                     std::span<const double> point,
                                     double h = 1e-5);

}  // namespace fer
