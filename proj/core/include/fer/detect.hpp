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

// Viola-Jones style Haar cascade evaluation (detection only).

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace fer {

/// 8-bit single-channel raster view, row-major.
struct GrayView {
  std::span<const std::uint8_t> pixels;
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Summed-area tables with a zero top row and left column:
/// sum(y, x) is the sum of all pixels above and left of (x, y), exclusive.
class IntegralImage {
 public:
  explicit IntegralImage(GrayView gray);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }

  std::int64_t sum(std::size_t y, std::size_t x) const {
    return sums_[y * (width_ + 1) + x];
  }
  std::int64_t squared_sum(std::size_t y, std::size_t x) const {
    return squared_[y * (width_ + 1) + x];
  }

  /// Pixel sum over [x, x+w) x [y, y+h). Requires the rectangle in bounds.
  std::int64_t rect_sum(std::size_t x, std::size_t y, std::size_t w,
                        std::size_t h) const {
    return sum(y + h, x + w) - sum(y, x + w) - sum(y + h, x) + sum(y, x);
  }
  std::int64_t rect_squared_sum(std::size_t x, std::size_t y, std::size_t w,
                                std::size_t h) const {
    return squared_sum(y + h, x + w) - squared_sum(y, x + w) -
           squared_sum(y + h, x) + squared_sum(y, x);
  }

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<std::int64_t> sums_;
  std::vector<std::int64_t> squared_;
};

struct HaarRect {
  int x = 0, y = 0, w = 0, h = 0;
  double weight = 0.0;
};

struct HaarFeature {
  std::vector<HaarRect> rects;  // 1 to 3, inside the base window
};

/// One split of a weak-classifier tree. Children <= 0 are leaves: child c
/// selects leaf_values[-c]; positive children index further nodes.
struct HaarNode {
  int left = 0;
  int right = -1;
  std::size_t feature = 0;
  double threshold = 0.0;
};

struct WeakClassifier {
  std::vector<HaarNode> nodes;
  std::vector<double> leaf_values;
};

struct CascadeStage {
  double threshold = 0.0;
  std::vector<WeakClassifier> classifiers;
};

struct CascadeModel {
  int window_width = 24;
  int window_height = 24;
  std::vector<CascadeStage> stages;
  std::vector<HaarFeature> features;

  /// Structural checks: >= 1 stage, feature indices in range, rectangles in
  /// the window, leaf references valid. Throws LoadError.
  void validate() const;
};

/// Parses the OpenCV cascade XML schema (`<cascade>` with `stages` and a
/// `features` table, HAAR feature type, stump or tree weak classifiers).
/// Errors carry the element path, e.g. `cascade/stages/_[3]/stageThreshold`.
CascadeModel load_cascade(std::istream& in);
CascadeModel load_cascade(const std::filesystem::path& path);

/// Runs the cascade on the window of size round(window * scale) at (x, y).
///
/// Rectangles are scaled and rounded; each rectangle's weight is rescaled
/// by its ideal/rounded area ratio so a flat window still scores the same as
/// at scale 1. The feature value is divided by the normalization area (the
/// window inset by one base pixel on each side) and compared against
/// node threshold * stddev, where stddev is the pixel standard deviation of
/// that area, floored at 1. Throws InvalidArgument if the window leaves the
/// image.
bool evaluate_window(const CascadeModel& model, const IntegralImage& ii,
                     std::size_t x, std::size_t y, double scale);

struct DetectionBox {
  int x = 0, y = 0, w = 0, h = 0;
  int neighbor_count = 0;

  friend bool operator==(const DetectionBox&, const DetectionBox&) = default;
};

struct DetectOptions {
  double scale_factor = 1.1;
  int min_neighbors = 3;
  int min_size = 24;
  double group_eps = 0.2;
};

/// Scans scales window * scale_factor^k while the window fits, with a step of
/// max(1, round(scale)) pixels, groups the raw hits and sorts by (y, x).
std::vector<DetectionBox> detect_multiscale(const CascadeModel& model,
                                            GrayView gray,
                                            const DetectOptions& options = {});

/// Two boxes are similar when every edge differs by at most
/// eps * (min width + min height) / 2. Similarity classes (transitive
/// closure) with more than `min_neighbors` members are replaced by their
/// rounded average box; neighbor_count is the class size. A surviving box
/// that lies inside another (edges within eps of the outer size) is dropped
/// when the outer one has more than max(3, inner) neighbors, or when the
/// inner one has fewer than 3. Sorted by (y, x).
std::vector<DetectionBox> group_rectangles(std::span<const DetectionBox> raw,
                                           int min_neighbors,
                                           double eps = 0.2);

/// Intersection over union of two boxes.
double iou(const DetectionBox& a, const DetectionBox& b);

}  // namespace fer
