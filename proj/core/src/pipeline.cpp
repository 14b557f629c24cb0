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

#include "fer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fer/error.hpp"
#include "fer/ops.hpp"

namespace fer {

std::string_view label_name(EmotionLabel label) {
  const auto i = static_cast<std::size_t>(label);
  if (i < kNumEmotions) return kEmotionNames[i];
  if (label == EmotionLabel::unknown) return "unknown";
  throw InvalidArgument("label_name: bad label");
}

std::optional<EmotionLabel> parse_label(std::string_view name) {
  for (EmotionLabel l : kAllLabels) {
    if (label_name(l) == name) return l;
  }
  return std::nullopt;
}

char32_t to_emoji(EmotionLabel label) {
  switch (label) {
    case EmotionLabel::neutral: return U'\U0001F610';
    case EmotionLabel::happiness: return U'\U0001F604';
    case EmotionLabel::surprise: return U'\U0001F62E';
    case EmotionLabel::sadness: return U'\U0001F622';
    case EmotionLabel::anger: return U'\U0001F620';
    case EmotionLabel::disgust: return U'\U0001F922';
    case EmotionLabel::fear: return U'\U0001F628';
    case EmotionLabel::contempt: return U'\U0001F612';
    case EmotionLabel::unknown: return U'❓';
  }
  throw InvalidArgument("to_emoji: bad label");
}

std::string utf8(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xc0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xe0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  } else {
    out += static_cast<char>(0xf0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3f));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
    out += static_cast<char>(0x80 | (cp & 0x3f));
  }
  return out;
}

std::string codepoint_string(char32_t cp) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(cp));
  return buf;
}

EmotionDistribution EmotionDistribution::from_probs(
    std::span<const double> probs) {
  if (probs.size() != kNumEmotions) {
    throw InvalidArgument("EmotionDistribution: expected 8 probabilities");
  }
  EmotionDistribution d;
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    if (!(probs[k] >= 0.0 && probs[k] <= 1.0)) {
      throw InvalidArgument("EmotionDistribution: probability outside [0,1]");
    }
    d.probs[k] = probs[k];
    sum += probs[k];
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    throw InvalidArgument("EmotionDistribution: probabilities sum to " +
                          std::to_string(sum));
  }
  return d;
}

EmotionDistribution EmotionDistribution::from_logits(
    std::span<const float> logits) {
  if (logits.size() != kNumEmotions) {
    throw InvalidArgument("EmotionDistribution: expected 8 logits");
  }
  if (!std::all_of(logits.begin(), logits.end(),
                   [](float v) { return std::isfinite(v); })) {
    throw InvalidArgument("EmotionDistribution: non-finite logit");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  EmotionDistribution d;
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    d.probs[k] = std::exp(static_cast<double>(logits[k]) - mx);
    sum += d.probs[k];
  }
  for (double& p : d.probs) p /= sum;
  return d;
}

std::size_t EmotionDistribution::argmax() const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumEmotions; ++k) {
    if (probs[k] > probs[best]) best = k;
  }
  return best;
}

ResNetClassifier::ResNetClassifier(ResNet<float> model)
    : model_(std::move(model)) {
  const ResNetConfig& c = model_.config();
  if (c.num_classes != kNumEmotions || c.input_channels != 1 ||
      c.input_height != kImageSide || c.input_width != kImageSide) {
    throw InvalidArgument(
        "ResNetClassifier: model must map 1x48x48 input to 8 classes");
  }
}

Tensor<float> ResNetClassifier::logits(const Tensor<float>& batch) const {
  return model_.infer(batch);
}

std::vector<float> resize_bilinear(std::span<const float> src,
                                   std::size_t src_w, std::size_t src_h,
                                   std::size_t dst_w, std::size_t dst_h) {
  if (src_w == 0 || src_h == 0 || dst_w == 0 || dst_h == 0) {
    throw InvalidArgument("resize_bilinear: zero dimension");
  }
  if (src.size() != src_w * src_h) {
    throw InvalidArgument("resize_bilinear: buffer does not match size");
  }
  struct Tap {
    std::size_t i0, i1;
    double f;
  };
  const auto taps = [](std::size_t src_n, std::size_t dst_n) {
    std::vector<Tap> t(dst_n);
    const double ratio = static_cast<double>(src_n) / static_cast<double>(dst_n);
    const double hi = static_cast<double>(src_n - 1);
    for (std::size_t d = 0; d < dst_n; ++d) {
      const double s =
          std::clamp((static_cast<double>(d) + 0.5) * ratio - 0.5, 0.0, hi);
      const auto i0 = static_cast<std::size_t>(std::floor(s));
      t[d] = {i0, std::min(i0 + 1, src_n - 1), s - static_cast<double>(i0)};
    }
    return t;
  };
  const std::vector<Tap> tx = taps(src_w, dst_w), ty = taps(src_h, dst_h);
  std::vector<float> out(dst_w * dst_h);
  for (std::size_t y = 0; y < dst_h; ++y) {
    const float* r0 = src.data() + ty[y].i0 * src_w;
    const float* r1 = src.data() + ty[y].i1 * src_w;
    for (std::size_t x = 0; x < dst_w; ++x) {
      const Tap& t = tx[x];
      const double top = r0[t.i0] + t.f * (r0[t.i1] - r0[t.i0]);
      const double bottom = r1[t.i0] + t.f * (r1[t.i1] - r1[t.i0]);
      out[y * dst_w + x] = static_cast<float>(top + ty[y].f * (bottom - top));
    }
  }
  return out;
}

Tensor<float> preprocess_roi(const Image& image, const DetectionBox& box) {
  if (box.w <= 0 || box.h <= 0) {
    throw InvalidArgument("preprocess_roi: zero-area box");
  }
  const auto clampi = [](long v, std::size_t hi) {
    return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(hi)));
  };
  const std::size_t x0 = clampi(box.x, image.width);
  const std::size_t y0 = clampi(box.y, image.height);
  const std::size_t x1 = clampi(static_cast<long>(box.x) + box.w, image.width);
  const std::size_t y1 = clampi(static_cast<long>(box.y) + box.h, image.height);
  if (x1 <= x0 || y1 <= y0) {
    throw InvalidArgument("preprocess_roi: box lies outside the image");
  }
  const std::size_t w = x1 - x0, h = y1 - y0;
  std::vector<float> gray(w * h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = x0 + x, sy = y0 + y;
      gray[y * w + x] =
          image.channels == 1
              ? image.at(sx, sy)
              : luma(image.at(sx, sy, 0), image.at(sx, sy, 1),
                     image.at(sx, sy, 2));
    }
  }
  std::vector<float> resized =
      resize_bilinear(gray, w, h, kImageSide, kImageSide);
  for (float& v : resized) v /= 255.0f;
  return Tensor<float>({1, kImageSide, kImageSide}, std::move(resized));
}

EmotionDistribution classify_roi(const EmotionClassifier& classifier,
                                 const Tensor<float>& roi) {
  if (roi.size() != kImagePixels) {
    throw InvalidArgument("classify_roi: ROI must hold 48x48 values");
  }
  const Tensor<float> logits =
      classifier.logits(roi.reshaped({1, 1, kImageSide, kImageSide}));
  if (logits.shape() != Shape{1, kNumEmotions}) {
    throw InvalidArgument("classify_roi: classifier returned shape " +
                          shape_string(logits.shape()));
  }
  return EmotionDistribution::from_logits(logits.values());
}

EmotionLabel decide_label(const EmotionDistribution& dist, double tau) {
  const std::size_t k = dist.argmax();
  return dist.probs[k] >= tau ? static_cast<EmotionLabel>(k)
                              : EmotionLabel::unknown;
}

std::optional<std::size_t> FramePrediction::largest_face() const {
  std::optional<std::size_t> best;
  long best_area = -1;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const long area = static_cast<long>(faces[i].box.w) * faces[i].box.h;
    if (area > best_area) {
      best_area = area;
      best = i;
    }
  }
  return best;
}

FramePrediction predict_image(const EmotionClassifier& classifier,
                              const CascadeModel& cascade, const Image& image,
                              const PredictOptions& options) {
  FramePrediction frame;
  frame.timestamp = std::chrono::system_clock::now();
  if (image.empty()) return frame;
  const Image gray = to_gray(image);
  const std::vector<DetectionBox> boxes =
      detect_multiscale(cascade, gray_view(gray), options.detect);
  if (boxes.empty()) return frame;

  // One batched forward pass for all faces of the frame.
  Tensor<float> batch({boxes.size(), 1, kImageSide, kImageSide});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Tensor<float> roi = preprocess_roi(gray, boxes[i]);
    std::copy(roi.data(), roi.data() + kImagePixels,
              batch.data() + i * kImagePixels);
  }
  const Tensor<float> logits = classifier.logits(batch);
  if (logits.shape() != Shape{boxes.size(), kNumEmotions}) {
    throw InvalidArgument("predict_image: classifier returned shape " +
                          shape_string(logits.shape()));
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    FaceResult face;
    face.box = boxes[i];
    face.distribution = EmotionDistribution::from_logits(
        logits.values().subspan(i * kNumEmotions, kNumEmotions));
    face.label = decide_label(face.distribution, options.tau);
    face.emoji = to_emoji(face.label);
    frame.faces.push_back(face);
  }
  return frame;
}

void EngagementConfig::validate() const {
  for (double w : weights) {
    if (!(w >= 0.0 && w <= 1.0)) {
      throw InvalidArgument("EngagementConfig: weights must lie in [0,1]");
    }
  }
  if (window_len == 0) {
    throw InvalidArgument("EngagementConfig: window_len must be >= 1");
  }
  if (!(no_face_score >= 0.0 && no_face_score <= 10.0)) {
    throw InvalidArgument("EngagementConfig: no_face_score must lie in [0,10]");
  }
}

double frame_engagement(const FramePrediction& frame,
                        const EngagementConfig& config) {
  const auto largest = frame.largest_face();
  if (!largest) return config.no_face_score;
  const auto& probs = frame.faces[*largest].distribution.probs;
  double s = 0.0;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    s += config.weights[k] * probs[k];
  }
  return 10.0 * s;
}

double engagement_score(std::span<const FramePrediction> history,
                        const EngagementConfig& config) {
  if (history.empty()) {
    throw InvalidArgument("engagement_score: empty history");
  }
  const std::size_t n = std::min(history.size(), config.window_len);
  double sum = 0.0;
  for (const FramePrediction& f : history.last(n)) {
    sum += frame_engagement(f, config);
  }
  return std::clamp(sum / static_cast<double>(n), 0.0, 10.0);
}

}  // namespace fer
