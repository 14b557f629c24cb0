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

#include <span>
#include <vector>

#include "fer/tensor.hpp"

namespace fer {

struct SgdOptions {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

/// Momentum buffers, one per parameter, created lazily on the first step.
template <typename T>
struct SgdState {
  std::vector<Tensor<T>> velocity;
};

/// One SGD step with heavy-ball momentum:
///   v <- momentum * v + grad + weight_decay * value   (decay-flagged only)
///   value <- value - lr * v
///
/// The parameter list must be the same, in the same order, on every call that
/// shares `state`.
template <typename T>
void sgd_step(std::span<Param<T>* const> params, const SgdOptions& options,
              SgdState<T>& state);

}  // namespace fer
