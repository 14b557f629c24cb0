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

// Layer primitives with forward and backward passes.
//
// All ops are pure: they read their arguments and return fresh tensors.
// Instantiated for float (training / inference) and double (gradient checks).

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fer/tensor.hpp"

namespace fer {

// --- convolution ------------------------------------------------------------

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> kernel;
  Tensor<T> bias;  // empty when the forward pass had no bias
};

/// Zero-padded 2-D cross-correlation (the kernel is not flipped).
///
/// input [N,C,H,W], kernel [F,C,kH,kW], bias [F] or empty.
/// Output [N,F,(H+2p-kH)/s+1,(W+2p-kW)/s+1].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernel,
                         const Tensor<T>& bias, std::size_t stride,
                         std::size_t pad);

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out,
                               const Tensor<T>& saved_input,
                               const Tensor<T>& kernel, bool has_bias,
                               std::size_t stride, std::size_t pad);

// --- batch normalization ----------------------------------------------------

enum class Mode { train, infer };

/// What the backward pass needs from a forward call.
template <typename T>
struct BatchNormSaved {
  Mode mode = Mode::infer;
  Tensor<T> normalized;     // x_hat, train mode only
  std::vector<T> inv_std;   // per channel, train mode only
};

template <typename T>
struct BatchNormOutput {
  Tensor<T> output;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  BatchNormSaved<T> saved;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

/// Per-channel batch normalization over N,H,W.
///
/// Train mode uses the biased batch variance and returns running statistics
/// updated as r = momentum * r + (1 - momentum) * batch_stat. Infer mode
/// normalizes with the running statistics and returns them unchanged.
template <typename T>
BatchNormOutput<T> batchnorm_forward(const Tensor<T>& input,
                                     const Tensor<T>& gamma,
                                     const Tensor<T>& beta,
                                     const Tensor<T>& running_mean,
                                     const Tensor<T>& running_var, Mode mode,
                                     T momentum = T(0.9), T epsilon = T(1e-5));

/// Throws ContractViolation when `saved` comes from an infer-mode forward.
template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out,
                                     const BatchNormSaved<T>& saved,
                                     const Tensor<T>& gamma);

// --- activations and pooling ------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// Gradient is zero where the input is <= 0 (including exactly 0).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out,
                        const Tensor<T>& saved_input);

/// 2x2 window, stride 2. Odd trailing rows/columns are dropped.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input);

/// Routes each window's gradient to its first maximum in row-major order.
template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out,
                             const Tensor<T>& saved_input);

/// [N,C,H,W] -> [N,C], spatial mean.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out,
                                   const Shape& input_shape);

// --- dense ------------------------------------------------------------------

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

/// input [N,D] x weight [D,K] + bias [K].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight,
                        const Tensor<T>& bias);

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out,
                             const Tensor<T>& saved_input,
                             const Tensor<T>& weight);

// --- loss -------------------------------------------------------------------

template <typename T>
struct SoftmaxCrossEntropy {
  double loss = 0.0;
  Tensor<T> probs;
  Tensor<T> grad_logits;
};

/// Mean negative log-likelihood of `labels` under softmax(logits).
///
/// With `class_weights` (length K) each sample's term is scaled by the weight
/// of its label; the mean is still taken over N.
template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(
    const Tensor<T>& logits, std::span<const int> labels,
    std::span<const double> class_weights = {});

/// Row-wise numerically stable softmax of [N,K] logits.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

// --- elementwise helpers ----------------------------------------------------

template <typename T>
void add_inplace(Tensor<T>& target, const Tensor<T>& other);

}  // namespace fer
