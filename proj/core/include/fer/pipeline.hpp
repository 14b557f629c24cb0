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

// Face detection -> ROI preprocessing -> emotion distribution -> label,
// emoji and a windowed engagement score.

#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fer/data.hpp"
#include "fer/detect.hpp"
#include "fer/image.hpp"
#include "fer/model.hpp"
#include "fer/tensor.hpp"

namespace fer {

/// The eight emotion classes in training order, then Unknown.
enum class EmotionLabel : int {
  neutral = 0,
  happiness,
  surprise,
  sadness,
  anger,
  disgust,
  fear,
  contempt,
  unknown,
};

inline constexpr std::size_t kNumLabels = 9;
inline constexpr std::array<EmotionLabel, kNumLabels> kAllLabels = {
    EmotionLabel::neutral, EmotionLabel::happiness, EmotionLabel::surprise,
    EmotionLabel::sadness, EmotionLabel::anger,     EmotionLabel::disgust,
    EmotionLabel::fear,    EmotionLabel::contempt,  EmotionLabel::unknown};

std::string_view label_name(EmotionLabel label);
std::optional<EmotionLabel> parse_label(std::string_view name);
char32_t to_emoji(EmotionLabel label);
std::string utf8(char32_t codepoint);
/// "U+1F604" style.
std::string codepoint_string(char32_t codepoint);

/// Eight probabilities, each in [0, 1], summing to 1 within 1e-6.
struct EmotionDistribution {
  std::array<double, kNumEmotions> probs{};

  /// Throws InvalidArgument when the invariant does not hold.
  static EmotionDistribution from_probs(std::span<const double> probs);
  /// Softmax with max subtraction.
  static EmotionDistribution from_logits(std::span<const float> logits);

  /// Lowest index among the maxima.
  std::size_t argmax() const;

  friend bool operator==(const EmotionDistribution&,
                         const EmotionDistribution&) = default;
};

/// Anything mapping a [N,1,48,48] batch in [0,1] to [N,8] logits.
class EmotionClassifier {
 public:
  virtual ~EmotionClassifier() = default;
  virtual Tensor<float> logits(const Tensor<float>& batch) const = 0;
};

class ResNetClassifier final : public EmotionClassifier {
 public:
  explicit ResNetClassifier(ResNet<float> model);
  Tensor<float> logits(const Tensor<float>& batch) const override;
  const ResNet<float>& model() const noexcept { return model_; }

 private:
  ResNet<float> model_;
};

/// Crops the box (clamped to the image), converts to gray with integer
/// Rec.601 luma, resizes to 48x48 bilinearly and scales by 1/255.
/// Result shape [1,48,48]. Throws InvalidArgument for an empty crop.
Tensor<float> preprocess_roi(const Image& image, const DetectionBox& box);

/// Bilinear resize of a row-major single-channel raster. Destination pixel d
/// samples source coordinate (d + 0.5) * src / dst - 0.5, clamped to
/// [0, src - 1].
std::vector<float> resize_bilinear(std::span<const float> src,
                                   std::size_t src_w, std::size_t src_h,
                                   std::size_t dst_w, std::size_t dst_h);

EmotionDistribution classify_roi(const EmotionClassifier& classifier,
                                 const Tensor<float>& roi);

inline constexpr double kDefaultTau = 0.4;

/// Argmax label when its probability is >= tau, Unknown otherwise.
EmotionLabel decide_label(const EmotionDistribution& dist,
                          double tau = kDefaultTau);

struct FaceResult {
  DetectionBox box;
  EmotionDistribution distribution;
  EmotionLabel label = EmotionLabel::unknown;
  char32_t emoji = 0;
};

struct FramePrediction {
  std::chrono::system_clock::time_point timestamp;
  std::vector<FaceResult> faces;  // detector order, (y, x)
  std::optional<double> engagement;

  /// Index of the largest-area face, first on ties; empty without faces.
  std::optional<std::size_t> largest_face() const;
};

struct PredictOptions {
  DetectOptions detect{};
  double tau = kDefaultTau;
};

FramePrediction predict_image(const EmotionClassifier& classifier,
                              const CascadeModel& cascade, const Image& image,
                              const PredictOptions& options = {});

struct EngagementConfig {
  std::array<double, kNumEmotions> weights{0.7, 0.9, 0.8, 0.3,
                                           0.2, 0.2, 0.3, 0.2};
  std::size_t window_len = 30;
  double no_face_score = 0.0;

  /// Weights in [0, 1], window_len >= 1, no_face_score in [0, 10].
  void validate() const;
};

/// 10 * sum(w * p) over the largest face, or no_face_score.
double frame_engagement(const FramePrediction& frame,
                        const EngagementConfig& config);

/// Mean frame score over the last window_len frames, clamped to [0, 10].
/// Throws InvalidArgument on an empty history.
double engagement_score(std::span<const FramePrediction> history,
                        const EngagementConfig& config);

}  // namespace fer
