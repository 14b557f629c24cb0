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

#include "fer/model.hpp"

#include <cmath>
#include <string>

namespace fer {

void ResNetConfig::validate() const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (stage_filters[i] == 0) {
      throw InvalidArgument("ResNetConfig: stage_filters must be positive");
    }
    if (blocks_per_stage[i] == 0) {
      throw InvalidArgument("ResNetConfig: blocks_per_stage must be >= 1");
    }
  }
  if (num_classes < 2) throw InvalidArgument("ResNetConfig: num_classes < 2");
  if (input_channels == 0 || input_height == 0 || input_width == 0) {
    throw InvalidArgument("ResNetConfig: empty input shape");
  }
  if (!(weight_decay >= 0.0)) {
    throw InvalidArgument("ResNetConfig: weight_decay must be >= 0");
  }
}

// --- layers -----------------------------------------------------------------

template <typename T>
Tensor<T> ConvLayer<T>::backward(const Tensor<T>& grad_out,
                                 const Tensor<T>& saved_input) {
  Conv2dGrads<T> g =
      conv2d_backward(grad_out, saved_input, kernel.value, false, stride, pad);
  add_inplace(kernel.grad, g.kernel);
  return std::move(g.input);
}

template <typename T>
Tensor<T> BatchNormLayer<T>::infer(const Tensor<T>& x) const {
  return batchnorm_forward(x, gamma.value, beta.value, running_mean,
                           running_var, Mode::infer, momentum, epsilon)
      .output;
}

template <typename T>
Tensor<T> BatchNormLayer<T>::train(const Tensor<T>& x,
                                   BatchNormSaved<T>& saved) {
  BatchNormOutput<T> out =
      batchnorm_forward(x, gamma.value, beta.value, running_mean, running_var,
                        Mode::train, momentum, epsilon);
  running_mean = std::move(out.running_mean);
  running_var = std::move(out.running_var);
  saved = std::move(out.saved);
  return std::move(out.output);
}

template <typename T>
Tensor<T> BatchNormLayer<T>::backward(const Tensor<T>& grad_out,
                                      const BatchNormSaved<T>& saved) {
  BatchNormGrads<T> g = batchnorm_backward(grad_out, saved, gamma.value);
  add_inplace(gamma.grad, g.gamma);
  add_inplace(beta.grad, g.beta);
  return std::move(g.input);
}

template <typename T>
Tensor<T> BasicBlock<T>::infer(const Tensor<T>& x) const {
  Tensor<T> h = relu(bn1.infer(conv1.forward(x)));
  Tensor<T> out = bn2.infer(conv2.forward(h));
  if (proj_conv) {
    add_inplace(out, proj_bn->infer(proj_conv->forward(x)));
  } else {
    add_inplace(out, x);
  }
  return relu(out);
}

template <typename T>
Tensor<T> BasicBlock<T>::train(const Tensor<T>& x, Cache& cache) {
  cache.input = x;
  cache.bn1_out = bn1.train(conv1.forward(x), cache.bn1);
  cache.hidden = relu(cache.bn1_out);
  cache.sum = bn2.train(conv2.forward(cache.hidden), cache.bn2);
  if (proj_conv) {
    add_inplace(cache.sum, proj_bn->train(proj_conv->forward(x), cache.proj_bn));
  } else {
    add_inplace(cache.sum, x);
  }
  return relu(cache.sum);
}

template <typename T>
Tensor<T> BasicBlock<T>::backward(const Tensor<T>& grad_out,
                                  const Cache& cache) {
  const Tensor<T> g_sum = relu_backward(grad_out, cache.sum);
  Tensor<T> g = bn2.backward(g_sum, cache.bn2);
  g = conv2.backward(g, cache.hidden);
  g = relu_backward(g, cache.bn1_out);
  g = bn1.backward(g, cache.bn1);
  Tensor<T> g_input = conv1.backward(g, cache.input);
  if (proj_conv) {
    Tensor<T> gp = proj_bn->backward(g_sum, cache.proj_bn);
    add_inplace(g_input, proj_conv->backward(gp, cache.input));
  } else {
    add_inplace(g_input, g_sum);
  }
  return g_input;
}

// --- construction -----------------------------------------------------------

namespace {

template <typename T>
Tensor<T> he_normal(const Shape& shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(shape);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (T& v : t.values()) v = static_cast<T>(rng.normal(0.0, stddev));
  return t;
}

template <typename T>
ConvLayer<T> make_conv(const std::string& name, std::size_t in,
                       std::size_t out, std::size_t k, std::size_t stride,
                       std::size_t pad, Rng& rng) {
  ConvLayer<T> conv;
  conv.kernel = Param<T>(name, he_normal<T>({out, in, k, k}, in * k * k, rng),
                         true);
  conv.stride = stride;
  conv.pad = pad;
  return conv;
}

template <typename T>
BatchNormLayer<T> make_bn(const std::string& name, std::size_t channels) {
  BatchNormLayer<T> bn;
  bn.gamma = Param<T>(name + ".gamma", Tensor<T>({channels}, T(1)), false);
  bn.beta = Param<T>(name + ".beta", Tensor<T>({channels}, T(0)), false);
  bn.running_mean = Tensor<T>({channels}, T(0));
  bn.running_var = Tensor<T>({channels}, T(1));
  return bn;
}

std::string block_name(std::size_t stage, std::size_t index) {
  return "stage" + std::to_string(stage + 1) + ".block" + std::to_string(index);
}

template <typename U, typename T>
Param<U> cast_param(const Param<T>& p) {
  Param<U> out(p.name, p.value.template cast<U>(), p.decay);
  out.grad = p.grad.template cast<U>();
  return out;
}

template <typename U, typename T>
ConvLayer<U> cast_conv(const ConvLayer<T>& c) {
  return ConvLayer<U>{cast_param<U>(c.kernel), c.stride, c.pad};
}

template <typename U, typename T>
BatchNormLayer<U> cast_bn(const BatchNormLayer<T>& b) {
  BatchNormLayer<U> out;
  out.gamma = cast_param<U>(b.gamma);
  out.beta = cast_param<U>(b.beta);
  out.running_mean = b.running_mean.template cast<U>();
  out.running_var = b.running_var.template cast<U>();
  out.momentum = static_cast<U>(b.momentum);
  out.epsilon = static_cast<U>(b.epsilon);
  return out;
}

}  // namespace

template <typename T>
ResNet<T> ResNet<T>::build(const ResNetConfig& config, Rng& rng) {
  config.validate();
  ResNet<T> net;
  net.config_ = config;
  const auto& f = config.stage_filters;
  net.stem_conv_ = make_conv<T>("stem.conv", config.input_channels, f[0], 3, 1,
                                1, rng);
  net.stem_bn_ = make_bn<T>("stem.bn", f[0]);
  std::size_t in = f[0];
  net.stages_.resize(4);
  for (std::size_t s = 0; s < 4; ++s) {
    for (std::size_t b = 0; b < config.blocks_per_stage[s]; ++b) {
      const std::string name = block_name(s, b);
      const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
      BasicBlock<T> block;
      block.conv1 = make_conv<T>(name + ".conv1", in, f[s], 3, stride, 1, rng);
      block.bn1 = make_bn<T>(name + ".bn1", f[s]);
      block.conv2 = make_conv<T>(name + ".conv2", f[s], f[s], 3, 1, 1, rng);
      block.bn2 = make_bn<T>(name + ".bn2", f[s]);
      if (stride != 1 || in != f[s]) {
        block.proj_conv =
            make_conv<T>(name + ".proj", in, f[s], 1, stride, 0, rng);
        block.proj_bn = make_bn<T>(name + ".proj_bn", f[s]);
      }
      net.stages_[s].push_back(std::move(block));
      in = f[s];
    }
  }
  net.head_weight_ =
      Param<T>("head.weight",
               he_normal<T>({in, config.num_classes}, in, rng), true);
  net.head_bias_ =
      Param<T>("head.bias", Tensor<T>({config.num_classes}, T(0)), false);
  return net;
}

template <typename T>
Tensor<T> ResNet<T>::infer(const Tensor<T>& images) const {
  Tensor<T> x = relu(stem_bn_.infer(stem_conv_.forward(images)));
  for (const auto& stage : stages_) {
    for (const auto& block : stage) x = block.infer(x);
  }
  return dense_forward(global_avg_pool(x), head_weight_.value,
                       head_bias_.value);
}

template <typename T>
Tensor<T> ResNet<T>::forward_train(const Tensor<T>& images) {
  Cache cache;
  cache.images = images;
  cache.stem_bn_out = stem_bn_.train(stem_conv_.forward(images), cache.stem_bn);
  Tensor<T> x = relu(cache.stem_bn_out);
  cache.blocks.resize(stages_.size());
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    cache.blocks[s].resize(stages_[s].size());
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      x = stages_[s][b].train(x, cache.blocks[s][b]);
    }
  }
  cache.pooled_from = x.shape();
  cache.pooled = global_avg_pool(x);
  Tensor<T> logits =
      dense_forward(cache.pooled, head_weight_.value, head_bias_.value);
  cache_ = std::move(cache);
  return logits;
}

template <typename T>
void ResNet<T>::backward(const Tensor<T>& grad_logits) {
  if (!cache_) {
    throw ContractViolation("ResNet::backward without forward_train");
  }
  const Cache& cache = *cache_;
  DenseGrads<T> head =
      dense_backward(grad_logits, cache.pooled, head_weight_.value);
  add_inplace(head_weight_.grad, head.weight);
  add_inplace(head_bias_.grad, head.bias);
  Tensor<T> g = global_avg_pool_backward(head.input, cache.pooled_from);
  for (std::size_t s = stages_.size(); s-- > 0;) {
    for (std::size_t b = stages_[s].size(); b-- > 0;) {
      g = stages_[s][b].backward(g, cache.blocks[s][b]);
    }
  }
  g = relu_backward(g, cache.stem_bn_out);
  g = stem_bn_.backward(g, cache.stem_bn);
  stem_conv_.backward(g, cache.images);
  cache_.reset();
}

template <typename T>
void ResNet<T>::zero_grad() {
  for (Param<T>* p : parameters()) p->zero_grad();
}

template <typename T>
std::vector<Param<T>*> ResNet<T>::parameters() {
  std::vector<Param<T>*> out;
  out.push_back(&stem_conv_.kernel);
  out.push_back(&stem_bn_.gamma);
  out.push_back(&stem_bn_.beta);
  for (auto& stage : stages_) {
    for (auto& block : stage) {
      out.push_back(&block.conv1.kernel);
      out.push_back(&block.bn1.gamma);
      out.push_back(&block.bn1.beta);
      out.push_back(&block.conv2.kernel);
      out.push_back(&block.bn2.gamma);
      out.push_back(&block.bn2.beta);
      if (block.proj_conv) {
        out.push_back(&block.proj_conv->kernel);
        out.push_back(&block.proj_bn->gamma);
        out.push_back(&block.proj_bn->beta);
      }
    }
  }
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

template <typename T>
std::vector<const Param<T>*> ResNet<T>::parameters() const {
  auto mut = const_cast<ResNet<T>*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
std::vector<NamedTensor<T>> ResNet<T>::state() {
  std::vector<NamedTensor<T>> out;
  auto conv = [&](const std::string& layer, ConvLayer<T>& c) {
    out.push_back({layer, "kernel", &c.kernel.value});
  };
  auto bn = [&](const std::string& layer, BatchNormLayer<T>& b) {
    out.push_back({layer, "gamma", &b.gamma.value});
    out.push_back({layer, "beta", &b.beta.value});
    out.push_back({layer, "running_mean", &b.running_mean});
    out.push_back({layer, "running_var", &b.running_var});
  };
  conv("stem.conv", stem_conv_);
  bn("stem.bn", stem_bn_);
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (std::size_t b = 0; b < stages_[s].size(); ++b) {
      const std::string name = block_name(s, b);
      BasicBlock<T>& block = stages_[s][b];
      conv(name + ".conv1", block.conv1);
      bn(name + ".bn1", block.bn1);
      conv(name + ".conv2", block.conv2);
      bn(name + ".bn2", block.bn2);
      if (block.proj_conv) {
        conv(name + ".proj", *block.proj_conv);
        bn(name + ".proj_bn", *block.proj_bn);
      }
    }
  }
  out.push_back({"head", "weight", &head_weight_.value});
  out.push_back({"head", "bias", &head_bias_.value});
  return out;
}

template <typename T>
std::vector<NamedTensorView<T>> ResNet<T>::state() const {
  std::vector<NamedTensorView<T>> out;
  for (const NamedTensor<T>& nt : const_cast<ResNet<T>*>(this)->state()) {
    out.push_back({nt.layer, nt.role, nt.tensor});
  }
  return out;
}

template <typename T>
std::size_t ResNet<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Param<T>* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
double ResNet<T>::decayed_sq_norm() const {
  double sum = 0.0;
  for (const Param<T>* p : parameters()) {
    if (!p->decay) continue;
    for (T v : p->value.values()) sum += static_cast<double>(v) * v;
  }
  return sum;
}

template <typename T>
std::vector<Shape> ResNet<T>::trace_shapes(std::size_t n) const {
  std::vector<Shape> shapes;
  std::size_t h = config_.input_height, w = config_.input_width;
  shapes.push_back({n, config_.stage_filters[0], h, w});
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (const auto& block : stages_[s]) {
      const std::size_t stride = block.conv1.stride;
      h = (h + 2 - 3) / stride + 1;
      w = (w + 2 - 3) / stride + 1;
      shapes.push_back({n, config_.stage_filters[s], h, w});
    }
  }
  return shapes;
}

template <typename T>
template <typename U>
ResNet<U> ResNet<T>::cast() const {
  ResNet<U> out;
  out.config_ = config_;
  out.stem_conv_ = cast_conv<U>(stem_conv_);
  out.stem_bn_ = cast_bn<U>(stem_bn_);
  out.stages_.resize(stages_.size());
  for (std::size_t s = 0; s < stages_.size(); ++s) {
    for (const auto& block : stages_[s]) {
      BasicBlock<U> b;
      b.conv1 = cast_conv<U>(block.conv1);
      b.bn1 = cast_bn<U>(block.bn1);
      b.conv2 = cast_conv<U>(block.conv2);
      b.bn2 = cast_bn<U>(block.bn2);
      if (block.proj_conv) {
        b.proj_conv = cast_conv<U>(*block.proj_conv);
        b.proj_bn = cast_bn<U>(*block.proj_bn);
      }
      out.stages_[s].push_back(std::move(b));
    }
  }
  out.head_weight_ = cast_param<U>(head_weight_);
  out.head_bias_ = cast_param<U>(head_bias_);
  return out;
}

// --- loss -------------------------------------------------------------------

template <typename T>
LossBreakdown loss_with_l2(ResNet<T>& model, const Tensor<T>& batch,
                           std::span<const int> labels,
                           std::span<const double> class_weights) {
  model.zero_grad();
  const Tensor<T> logits = model.forward_train(batch);
  const SoftmaxCrossEntropy<T> ce =
      softmax_cross_entropy(logits, labels, class_weights);
  model.backward(ce.grad_logits);

  LossBreakdown out;
  out.data_loss = ce.loss;
  const double wd = model.config().weight_decay;
  if (wd != 0.0) {
    out.l2_term = 0.5 * wd * model.decayed_sq_norm();
    const T wd_t = static_cast<T>(wd);
    for (Param<T>* p : model.parameters()) {
      if (!p->decay) continue;
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        p->grad[i] += wd_t * p->value[i];
      }
    }
  }
  out.total = out.data_loss + out.l2_term;
  const std::size_t k = logits.dim(1);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const T* row = ce.probs.data() + r * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (static_cast<int>(best) == labels[r]) ++out.correct;
  }
  return out;
}

template struct ConvLayer<float>;
template struct ConvLayer<double>;
template struct BatchNormLayer<float>;
template struct BatchNormLayer<double>;
template struct BasicBlock<float>;
template struct BasicBlock<double>;
template class ResNet<float>;
template class ResNet<double>;
template ResNet<double> ResNet<float>::cast<double>() const;
template ResNet<float> ResNet<double>::cast<float>() const;
template ResNet<float> ResNet<float>::cast<float>() const;
template LossBreakdown loss_with_l2(ResNet<float>&, const Tensor<float>&,
                                    std::span<const int>,
                                    std::span<const double>);
template LossBreakdown loss_with_l2(ResNet<double>&, const Tensor<double>&,
                                    std::span<const int>,
                                    std::span<const double>);

}  // namespace fer
