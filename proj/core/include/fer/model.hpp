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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fer/ops.hpp"
#include "fer/rng.hpp"
#include "fer/tensor.hpp"

namespace fer {

struct ResNetConfig {
  std::array<std::size_t, 4> stage_filters{64, 128, 256, 512};
  std::array<std::size_t, 4> blocks_per_stage{2, 2, 2, 2};
  std::size_t num_classes = 8;
  std::size_t input_channels = 1;
  std::size_t input_height = 48;
  std::size_t input_width = 48;
  double weight_decay = 1e-4;

  /// Throws InvalidArgument on zero widths/blocks, num_classes < 2 or a
  /// negative weight decay.
  void validate() const;

  friend bool operator==(const ResNetConfig&, const ResNetConfig&) = default;
};

// --- layers -----------------------------------------------------------------

/// Bias-free convolution; every convolution in the network feeds a BN layer.
template <typename T>
struct ConvLayer {
  Param<T> kernel;
  std::size_t stride = 1;
  std::size_t pad = 0;

  Tensor<T> forward(const Tensor<T>& x) const {
    return conv2d_forward(x, kernel.value, Tensor<T>(), stride, pad);
  }
  /// Accumulates into kernel.grad and returns the input gradient.
  Tensor<T> backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input);
};

template <typename T>
struct BatchNormLayer {
  Param<T> gamma;
  Param<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.9);
  T epsilon = T(1e-5);

  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> train(const Tensor<T>& x, BatchNormSaved<T>& saved);
  Tensor<T> backward(const Tensor<T>& grad_out, const BatchNormSaved<T>& saved);
};

/// conv3x3 -> BN -> ReLU -> conv3x3 -> BN, plus shortcut, then ReLU.
/// The shortcut is a 1x1 strided conv + BN when the shape changes.
template <typename T>
struct BasicBlock {
  ConvLayer<T> conv1;
  BatchNormLayer<T> bn1;
  ConvLayer<T> conv2;
  BatchNormLayer<T> bn2;
  std::optional<ConvLayer<T>> proj_conv;
  std::optional<BatchNormLayer<T>> proj_bn;

  struct Cache {
    Tensor<T> input;
    BatchNormSaved<T> bn1;
    Tensor<T> bn1_out;
    Tensor<T> hidden;
    BatchNormSaved<T> bn2;
    BatchNormSaved<T> proj_bn;
    Tensor<T> sum;
  };

  bool has_projection() const { return proj_conv.has_value(); }

  Tensor<T> infer(const Tensor<T>& x) const;
  Tensor<T> train(const Tensor<T>& x, Cache& cache);
  Tensor<T> backward(const Tensor<T>& grad_out, const Cache& cache);
};

/// One entry of the serialized state, in build order.
template <typename T>
struct NamedTensor {
  std::string layer;
  std::string role;  // kernel, gamma, beta, running_mean, running_var, weight, bias
  Tensor<T>* tensor;
};

template <typename T>
struct NamedTensorView {
  std::string layer;
  std::string role;
  const Tensor<T>* tensor;
};

// --- network ----------------------------------------------------------------

/// ResNet18-style classifier for small grayscale faces.
///
/// Stem: conv3x3(stage_filters[0], stride 1) -> BN -> ReLU, no max-pool.
/// Four stages of basic blocks; the first block of stages 2-4 halves the
/// spatial size. Global average pool, then a dense layer to num_classes.
template <typename T>
class ResNet {
 public:
  ResNet() = default;

  /// He-normal kernels (std = sqrt(2 / fan_in)), BN gamma 1 / beta 0,
  /// running mean 0 / var 1, dense bias 0.
  static ResNet build(const ResNetConfig& config, Rng& rng);

  const ResNetConfig& config() const noexcept { return config_; }

  /// Logits [N, num_classes], BN in infer mode. Thread-safe.
  Tensor<T> infer(const Tensor<T>& images) const;

  /// Logits with BN in train mode; caches activations for backward().
  Tensor<T> forward_train(const Tensor<T>& images);

  /// Accumulates parameter gradients for the last forward_train() call.
  void backward(const Tensor<T>& grad_logits);

  void zero_grad();

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;

  /// Every tensor that is saved to disk, parameters and BN running stats.
  std::vector<NamedTensor<T>> state();
  std::vector<NamedTensorView<T>> state() const;

  /// Trainable scalar count.
  std::size_t parameter_count() const;

  /// Sum of squared values over decay-flagged parameters.
  double decayed_sq_norm() const;

  /// Output shape of the stem followed by every block, for batch size `n`.
  std::vector<Shape> trace_shapes(std::size_t n) const;

  BasicBlock<T>& block(std::size_t stage, std::size_t index) {
    return stages_.at(stage).at(index);
  }
  const BasicBlock<T>& block(std::size_t stage, std::size_t index) const {
    return stages_.at(stage).at(index);
  }
  Param<T>& head_weight() { return head_weight_; }
  Param<T>& head_bias() { return head_bias_; }

  template <typename U>
  ResNet<U> cast() const;

 private:
  template <typename U>
  friend class ResNet;

  ResNetConfig config_;
  ConvLayer<T> stem_conv_;
  BatchNormLayer<T> stem_bn_;
  std::vector<std::vector<BasicBlock<T>>> stages_;
  Param<T> head_weight_;
  Param<T> head_bias_;

  struct Cache {
    Tensor<T> images;
    BatchNormSaved<T> stem_bn;
    Tensor<T> stem_bn_out;
    std::vector<std::vector<typename BasicBlock<T>::Cache>> blocks;
    Shape pooled_from;
    Tensor<T> pooled;
  };
  std::optional<Cache> cache_;
};

extern template class ResNet<float>;
extern template class ResNet<double>;

// --- loss -------------------------------------------------------------------

struct LossBreakdown {
  double total = 0.0;
  double data_loss = 0.0;
  double l2_term = 0.0;
  std::size_t correct = 0;
};

/// Cross-entropy plus (weight_decay / 2) * sum ||W||^2 over decay-flagged
/// parameters, with BN in train mode.
///
/// Zeroes and then fills every parameter gradient with d(total)/dW; the
/// weight_decay * W term is added here, so the optimizer must run with
/// weight_decay = 0 when fed these gradients.
template <typename T>
LossBreakdown loss_with_l2(ResNet<T>& model, const Tensor<T>& batch,
                           std::span<const int> labels,
                           std::span<const double> class_weights = {});

}  // namespace fer
