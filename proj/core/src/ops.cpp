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

#include "fer/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fer {

namespace {

template <typename T>
using MatrixRM =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatrixRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatrixRM<T>>;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

void require_rank(const Shape& shape, std::size_t rank, const char* op,
                  const char* name) {
  require(shape.size() == rank, std::string(op) + ": " + name +
                                    " must have rank " + std::to_string(rank) +
                                    ", got " + shape_string(shape));
}

struct ConvGeometry {
  std::size_t n, c, h, w;    // input
  std::size_t f, kh, kw;     // kernel
  std::size_t oh, ow;        // output
  std::size_t stride, pad;

  std::size_t patch() const { return c * kh * kw; }
  std::size_t pixels() const { return oh * ow; }
};

template <typename T>
ConvGeometry conv_geometry(const Shape& in, const Shape& k, std::size_t stride,
                           std::size_t pad, const char* op) {
  require_rank(in, 4, op, "input");
  require_rank(k, 4, op, "kernel");
  require(stride >= 1, std::string(op) + ": stride must be positive");
  require(k[1] == in[1], std::string(op) + ": kernel channels " +
                             std::to_string(k[1]) + " != input channels " +
                             std::to_string(in[1]));
  require(k[2] <= in[2] + 2 * pad && k[3] <= in[3] + 2 * pad,
          std::string(op) + ": kernel larger than padded input");
  ConvGeometry g{in[0], in[1], in[2], in[3], k[0], k[2], k[3], 0, 0,
                 stride, pad};
  g.oh = (g.h + 2 * pad - g.kh) / stride + 1;
  g.ow = (g.w + 2 * pad - g.kw) / stride + 1;
  return g;
}

// cols[(c*kh + i)*kw + j][oy*ow + ox] = x[c][oy*s - p + i][ox*s - p + j]
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    const T* plane = x + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j, ++row) {
        T* out = cols + row * g.pixels();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride - pad +
              static_cast<std::ptrdiff_t>(i);
          T* out_row = out + oy * g.ow;
          if (iy < 0 || iy >= h) {
            std::fill(out_row, out_row + g.ow, T(0));
            continue;
          }
          const T* in_row = plane + iy * w;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * stride - pad +
                static_cast<std::ptrdiff_t>(j);
            out_row[ox] = (ix < 0 || ix >= w) ? T(0) : in_row[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* x) {
  const auto h = static_cast<std::ptrdiff_t>(g.h);
  const auto w = static_cast<std::ptrdiff_t>(g.w);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.c; ++c) {
    T* plane = x + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j, ++row) {
        const T* in = cols + row * g.pixels();
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride - pad +
              static_cast<std::ptrdiff_t>(i);
          if (iy < 0 || iy >= h) continue;
          T* out_row = plane + iy * w;
          const T* in_row = in + oy * g.ow;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox) * stride - pad +
                static_cast<std::ptrdiff_t>(j);
            if (ix >= 0 && ix < w) out_row[ix] += in_row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& kernel,
                         const Tensor<T>& bias, std::size_t stride,
                         std::size_t pad) {
  const ConvGeometry g =
      conv_geometry<T>(input.shape(), kernel.shape(), stride, pad,
                       "conv2d_forward");
  const bool has_bias = !bias.empty();
  if (has_bias) {
    require(bias.shape() == Shape{g.f},
            "conv2d_forward: bias shape " + shape_string(bias.shape()) +
                " != [" + std::to_string(g.f) + "]");
  }
  Tensor<T> out({g.n, g.f, g.oh, g.ow});
  std::vector<T> cols(g.patch() * g.pixels());
  ConstMapRM<T> k(kernel.data(), g.f, g.patch());
  for (std::size_t n = 0; n < g.n; ++n) {
    im2col(input.data() + n * g.c * g.h * g.w, g, cols.data());
    ConstMapRM<T> c(cols.data(), g.patch(), g.pixels());
    MapRM<T> o(out.data() + n * g.f * g.pixels(), g.f, g.pixels());
    o.noalias() = k * c;
    if (has_bias) {
      for (std::size_t f = 0; f < g.f; ++f) o.row(f).array() += bias[f];
    }
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out,
                               const Tensor<T>& saved_input,
                               const Tensor<T>& kernel, bool has_bias,
                               std::size_t stride, std::size_t pad) {
  const ConvGeometry g =
      conv_geometry<T>(saved_input.shape(), kernel.shape(), stride, pad,
                       "conv2d_backward");
  require(grad_out.shape() == Shape{g.n, g.f, g.oh, g.ow},
          "conv2d_backward: grad_out shape " + shape_string(grad_out.shape()) +
              " != forward output shape " +
              shape_string({g.n, g.f, g.oh, g.ow}));
  Conv2dGrads<T> grads{Tensor<T>(saved_input.shape()),
                       Tensor<T>(kernel.shape()), Tensor<T>()};
  if (has_bias) grads.bias = Tensor<T>({g.f});

  std::vector<T> cols(g.patch() * g.pixels());
  std::vector<T> grad_cols(g.patch() * g.pixels());
  ConstMapRM<T> k(kernel.data(), g.f, g.patch());
  MapRM<T> gk(grads.kernel.data(), g.f, g.patch());
  for (std::size_t n = 0; n < g.n; ++n) {
    ConstMapRM<T> go(grad_out.data() + n * g.f * g.pixels(), g.f, g.pixels());
    im2col(saved_input.data() + n * g.c * g.h * g.w, g, cols.data());
    ConstMapRM<T> c(cols.data(), g.patch(), g.pixels());
    gk.noalias() += go * c.transpose();
    MapRM<T> gc(grad_cols.data(), g.patch(), g.pixels());
    gc.noalias() = k.transpose() * go;
    col2im_add(grad_cols.data(), g, grads.input.data() + n * g.c * g.h * g.w);
    if (has_bias) {
      for (std::size_t f = 0; f < g.f; ++f) grads.bias[f] += go.row(f).sum();
    }
  }
  return grads;
}

template <typename T>
BatchNormOutput<T> batchnorm_forward(const Tensor<T>& input,
                                     const Tensor<T>& gamma,
                                     const Tensor<T>& beta,
                                     const Tensor<T>& running_mean,
                                     const Tensor<T>& running_var, Mode mode,
                                     T momentum, T epsilon) {
  require_rank(input.shape(), 4, "batchnorm_forward", "input");
  require(epsilon > T(0), "batchnorm_forward: epsilon must be positive");
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t hw = input.dim(2) * input.dim(3);
  const Shape channel_shape{c};
  require(gamma.shape() == channel_shape && beta.shape() == channel_shape &&
              running_mean.shape() == channel_shape &&
              running_var.shape() == channel_shape,
          "batchnorm_forward: per-channel tensors must have shape [" +
              std::to_string(c) + "]");

  BatchNormOutput<T> out{Tensor<T>(input.shape()), running_mean, running_var,
                         {}};
  out.saved.mode = mode;
  if (mode == Mode::infer) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T scale = gamma[ch] / std::sqrt(running_var[ch] + epsilon);
      const T shift = beta[ch] - running_mean[ch] * scale;
      for (std::size_t b = 0; b < n; ++b) {
        const T* x = input.data() + (b * c + ch) * hw;
        T* y = out.output.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) y[i] = x[i] * scale + shift;
      }
    }
    return out;
  }

  const std::size_t m = n * hw;
  require(m >= 2, "batchnorm_forward: train mode needs N*H*W >= 2");
  out.saved.normalized = Tensor<T>(input.shape());
  out.saved.inv_std.resize(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const T* x = input.data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) sum += x[i];
    }
    const double mean = sum / static_cast<double>(m);
    double sq = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const T* x = input.data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double d = x[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(m);
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + epsilon));
    out.saved.inv_std[ch] = inv_std;
    const T mean_t = static_cast<T>(mean);
    for (std::size_t b = 0; b < n; ++b) {
      const T* x = input.data() + (b * c + ch) * hw;
      T* xh = out.saved.normalized.data() + (b * c + ch) * hw;
      T* y = out.output.data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        xh[i] = (x[i] - mean_t) * inv_std;
        y[i] = gamma[ch] * xh[i] + beta[ch];
      }
    }
    out.running_mean[ch] =
        momentum * running_mean[ch] + (T(1) - momentum) * mean_t;
    out.running_var[ch] =
        momentum * running_var[ch] + (T(1) - momentum) * static_cast<T>(var);
  }
  return out;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out,
                                     const BatchNormSaved<T>& saved,
                                     const Tensor<T>& gamma) {
  if (saved.mode != Mode::train) {
    throw ContractViolation(
        "batchnorm_backward: forward pass ran in infer mode");
  }
  require(grad_out.shape() == saved.normalized.shape(),
          "batchnorm_backward: grad_out shape " +
              shape_string(grad_out.shape()) + " != input shape " +
              shape_string(saved.normalized.shape()));
  const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
  const std::size_t hw = grad_out.dim(2) * grad_out.dim(3);
  const double m = static_cast<double>(n * hw);
  BatchNormGrads<T> g{Tensor<T>(grad_out.shape()), Tensor<T>({c}),
                      Tensor<T>({c})};
  for (std::size_t ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const T* dy = grad_out.data() + (b * c + ch) * hw;
      const T* xh = saved.normalized.data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += dy[i];
        sum_dy_xh += static_cast<double>(dy[i]) * xh[i];
      }
    }
    g.beta[ch] = static_cast<T>(sum_dy);
    g.gamma[ch] = static_cast<T>(sum_dy_xh);
    const double k = static_cast<double>(gamma[ch]) * saved.inv_std[ch] / m;
    for (std::size_t b = 0; b < n; ++b) {
      const T* dy = grad_out.data() + (b * c + ch) * hw;
      const T* xh = saved.normalized.data() + (b * c + ch) * hw;
      T* dx = g.input.data() + (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        dx[i] = static_cast<T>(k * (m * dy[i] - sum_dy - xh[i] * sum_dy_xh));
      }
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (T& v : out.values()) v = v > T(0) ? v : T(0);
  return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out,
                        const Tensor<T>& saved_input) {
  require(grad_out.shape() == saved_input.shape(),
          "relu_backward: shape mismatch");
  Tensor<T> out(grad_out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = saved_input[i] > T(0) ? grad_out[i] : T(0);
  }
  return out;
}

namespace {

// Offset (within the input plane) of the first maximum of the 2x2 window at
// output position (oy, ox).
template <typename T>
std::size_t window_argmax(const T* plane, std::size_t w, std::size_t oy,
                          std::size_t ox) {
  std::size_t best = (2 * oy) * w + 2 * ox;
  for (std::size_t dy = 0; dy < 2; ++dy) {
    for (std::size_t dx = 0; dx < 2; ++dx) {
      const std::size_t idx = (2 * oy + dy) * w + 2 * ox + dx;
      if (plane[idx] > plane[best]) best = idx;
    }
  }
  return best;
}

}  // namespace

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& input) {
  require_rank(input.shape(), 4, "maxpool2d", "input");
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2),
                    w = input.dim(3);
  require(h >= 2 && w >= 2, "maxpool2d: input smaller than 2x2");
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor<T> out({n, c, oh, ow});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* plane = input.data() + p * h * w;
    T* o = out.data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        o[oy * ow + ox] = plane[window_argmax(plane, w, oy, ox)];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Tensor<T>& grad_out,
                             const Tensor<T>& saved_input) {
  require_rank(saved_input.shape(), 4, "maxpool2d_backward", "input");
  const std::size_t n = saved_input.dim(0), c = saved_input.dim(1),
                    h = saved_input.dim(2), w = saved_input.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  require(grad_out.shape() == Shape{n, c, oh, ow},
          "maxpool2d_backward: grad_out shape mismatch");
  Tensor<T> out(saved_input.shape());
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* plane = saved_input.data() + p * h * w;
    const T* go = grad_out.data() + p * oh * ow;
    T* gi = out.data() + p * h * w;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        gi[window_argmax(plane, w, oy, ox)] += go[oy * ow + ox];
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  require_rank(input.shape(), 4, "global_avg_pool", "input");
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t hw = input.dim(2) * input.dim(3);
  Tensor<T> out({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    const T* x = input.data() + p * hw;
    double sum = 0.0;
    for (std::size_t i = 0; i < hw; ++i) sum += x[i];
    out[p] = static_cast<T>(sum / static_cast<double>(hw));
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& grad_out,
                                   const Shape& input_shape) {
  require_rank(input_shape, 4, "global_avg_pool_backward", "input");
  require(grad_out.shape() == Shape{input_shape[0], input_shape[1]},
          "global_avg_pool_backward: grad_out shape mismatch");
  const std::size_t hw = input_shape[2] * input_shape[3];
  Tensor<T> out(input_shape);
  const T scale = T(1) / static_cast<T>(hw);
  for (std::size_t p = 0; p < grad_out.size(); ++p) {
    std::fill_n(out.data() + p * hw, hw, grad_out[p] * scale);
  }
  return out;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weight,
                        const Tensor<T>& bias) {
  require_rank(input.shape(), 2, "dense_forward", "input");
  require_rank(weight.shape(), 2, "dense_forward", "weight");
  const std::size_t n = input.dim(0), d = input.dim(1), k = weight.dim(1);
  require(weight.dim(0) == d, "dense_forward: weight rows " +
                                  std::to_string(weight.dim(0)) +
                                  " != input features " + std::to_string(d));
  require(bias.shape() == Shape{k}, "dense_forward: bias shape mismatch");
  Tensor<T> out({n, k});
  MapRM<T> o(out.data(), n, k);
  o.noalias() = ConstMapRM<T>(input.data(), n, d) *
                ConstMapRM<T>(weight.data(), d, k);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) o(r, j) += bias[j];
  }
  return out;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out,
                             const Tensor<T>& saved_input,
                             const Tensor<T>& weight) {
  require_rank(saved_input.shape(), 2, "dense_backward", "input");
  const std::size_t n = saved_input.dim(0), d = saved_input.dim(1),
                    k = weight.dim(1);
  require(grad_out.shape() == Shape{n, k},
          "dense_backward: grad_out shape mismatch");
  DenseGrads<T> g{Tensor<T>({n, d}), Tensor<T>({d, k}), Tensor<T>({k})};
  ConstMapRM<T> go(grad_out.data(), n, k);
  MapRM<T>(g.input.data(), n, d).noalias() =
      go * ConstMapRM<T>(weight.data(), d, k).transpose();
  MapRM<T>(g.weight.data(), d, k).noalias() =
      ConstMapRM<T>(saved_input.data(), n, d).transpose() * go;
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += go(r, j);
    g.bias[j] = static_cast<T>(s);
  }
  return g;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits.shape(), 2, "softmax", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> probs({n, k});
  for (std::size_t r = 0; r < n; ++r) {
    const T* z = logits.data() + r * k;
    T* p = probs.data() + r * k;
    const T mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(double(z[j] - mx));
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = static_cast<T>(std::exp(double(z[j] - mx)) / sum);
    }
  }
  return probs;
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_cross_entropy(
    const Tensor<T>& logits, std::span<const int> labels,
    std::span<const double> class_weights) {
  require_rank(logits.shape(), 2, "softmax_cross_entropy", "logits");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  require(labels.size() == n, "softmax_cross_entropy: " +
                                  std::to_string(labels.size()) +
                                  " labels for " + std::to_string(n) + " rows");
  require(class_weights.empty() || class_weights.size() == k,
          "softmax_cross_entropy: class_weights must have length K");
  SoftmaxCrossEntropy<T> out;
  out.grad_logits = Tensor<T>({n, k});
  out.probs = Tensor<T>({n, k});
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    require(y >= 0 && static_cast<std::size_t>(y) < k,
            "softmax_cross_entropy: label " + std::to_string(y) +
                " out of range [0," + std::to_string(k) + ")");
    const T* z = logits.data() + r * k;
    const T mx = *std::max_element(z, z + k);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(double(z[j] - mx));
    const double log_sum = std::log(sum);
    const double w = class_weights.empty() ? 1.0 : class_weights[y];
    total += w * (log_sum - double(z[y] - mx));
    for (std::size_t j = 0; j < k; ++j) {
      const double p = std::exp(double(z[j] - mx) - log_sum);
      out.probs[r * k + j] = static_cast<T>(p);
      const double onehot = static_cast<int>(j) == y ? 1.0 : 0.0;
      out.grad_logits[r * k + j] =
          static_cast<T>(w * (p - onehot) / static_cast<double>(n));
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

template <typename T>
void add_inplace(Tensor<T>& target, const Tensor<T>& other) {
  require(target.shape() == other.shape(),
          "add_inplace: shape " + shape_string(target.shape()) +
              " != " + shape_string(other.shape()));
  for (std::size_t i = 0; i < target.size(); ++i) target[i] += other[i];
}

#define FER_INSTANTIATE_OPS(T)                                                 \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&,        \
                                    const Tensor<T>&, std::size_t,             \
                                    std::size_t);                              \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,  \
                                          const Tensor<T>&, bool, std::size_t, \
                                          std::size_t);                        \
  template BatchNormOutput<T> batchnorm_forward(                               \
      const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,  \
      const Tensor<T>&, Mode, T, T);                                           \
  template BatchNormGrads<T> batchnorm_backward(                               \
      const Tensor<T>&, const BatchNormSaved<T>&, const Tensor<T>&);           \
  template Tensor<T> relu(const Tensor<T>&);                                   \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);        \
  template Tensor<T> maxpool2d(const Tensor<T>&);                              \
  template Tensor<T> maxpool2d_backward(const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                        \
  template Tensor<T> global_avg_pool_backward(const Tensor<T>&, const Shape&); \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&,         \
                                   const Tensor<T>&);                          \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&,    \
                                        const Tensor<T>&);                     \
  template Tensor<T> softmax(const Tensor<T>&);                                \
  template SoftmaxCrossEntropy<T> softmax_cross_entropy(                       \
      const Tensor<T>&, std::span<const int>, std::span<const double>);        \
  template void add_inplace(Tensor<T>&, const Tensor<T>&);

FER_INSTANTIATE_OPS(float)
FER_INSTANTIATE_OPS(double)

#undef FER_INSTANTIATE_OPS

}  // namespace fer
