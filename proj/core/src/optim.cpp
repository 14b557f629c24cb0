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

#include "fer/optim.hpp"

namespace fer {

template <typename T>
void sgd_step(std::span<Param<T>* const> params, const SgdOptions& options,
              SgdState<T>& state) {
  if (!(options.lr > 0.0)) throw InvalidArgument("sgd_step: lr must be > 0");
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const Param<T>* p : params) state.velocity.emplace_back(p->value.shape());
  }
  if (state.velocity.size() != params.size()) {
    throw InvalidArgument("sgd_step: parameter list changed between steps");
  }
  const T lr = static_cast<T>(options.lr);
  const T mu = static_cast<T>(options.momentum);
  const T wd = static_cast<T>(options.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param<T>& p = *params[i];
    Tensor<T>& v = state.velocity[i];
    if (v.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw InvalidArgument("sgd_step: shape mismatch for " + p.name);
    }
    const bool decay = p.decay && wd != T(0);
    for (std::size_t j = 0; j < v.size(); ++j) {
      T g = p.grad[j];
      if (decay) g += wd * p.value[j];
      v[j] = mu * v[j] + g;
      p.value[j] -= lr * v[j];
    }
  }
}

template void sgd_step(std::span<Param<float>* const>, const SgdOptions&,
                       SgdState<float>&);
template void sgd_step(std::span<Param<double>* const>, const SgdOptions&,
                       SgdState<double>&);

}  // namespace fer
