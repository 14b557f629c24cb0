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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fer/rng.hpp"
#include "fer/tensor.hpp"

namespace fer {

inline constexpr std::size_t kImageSide = 48;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr std::size_t kNumEmotions = 8;

/// FER+ emotion order; the index is the 8-class label.
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "neutral", "happiness", "surprise", "sadness",
    "anger",   "disgust",   "fear",     "contempt"};

/// FER2013 7-class names, 0=Angry ... 6=Neutral.
inline constexpr std::array<std::string_view, 7> kFer2013Names = {
    "Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral"};

enum class Usage { training, public_test, private_test };

std::string_view usage_name(Usage usage);  // "Training", "PublicTest", ...
std::optional<Usage> parse_usage(std::string_view text);

/// 48x48 grayscale, row-major, top-left origin.
using PixelGrid = std::array<std::uint8_t, kImagePixels>;

struct FerSample {
  PixelGrid pixels{};
  int fer_label = 0;
  Usage usage = Usage::training;

  friend bool operator==(const FerSample&, const FerSample&) = default;
};

/// Column order of the FER+ vote table.
enum FerPlusColumn : std::size_t {
  kNeutral, kHappiness, kSurprise, kSadness, kAnger, kDisgust, kFear,
  kContempt, kUnknown, kNotAFace
};

struct FerPlusVotes {
  std::string usage;
  std::string image_name;  // empty for rows the re-annotation dropped
  std::array<int, 10> counts{};

  friend bool operator==(const FerPlusVotes&, const FerPlusVotes&) = default;
};

struct LabeledSample {
  PixelGrid pixels{};
  int label8 = 0;
  Usage usage = Usage::training;
};

// --- CSV --------------------------------------------------------------------

/// Header `emotion,pixels,Usage`; every error names its 1-based data row.
std::vector<FerSample> parse_fer2013_csv(std::istream& in);
void write_fer2013_csv(std::ostream& out, std::span<const FerSample> samples);

/// Header `usage,Image name,neutral,...,contempt,unknown,NF` (the first
/// column name is matched case-insensitively, as the published file
/// capitalizes it).
std::vector<FerPlusVotes> parse_ferplus_csv(std::istream& in);
void write_ferplus_csv(std::ostream& out,
                       std::span<const FerPlusVotes> votes);

// --- merge ------------------------------------------------------------------

struct MergeStats {
  std::size_t kept = 0;
  std::size_t unknown_or_not_face = 0;  // unknown / NF holds the strict max
  std::size_t weak_winner = 0;          // winning emotion has < 3 votes
  std::size_t no_votes = 0;

  std::size_t excluded() const {
    return unknown_or_not_face + weak_winner + no_votes;
  }
};

struct MergeResult {
  std::vector<LabeledSample> samples;
  MergeStats stats;
};

inline constexpr int kMinWinningVotes = 3;

/// Majority vote over the 8 emotion columns, ties to the lowest index.
/// Row i of `votes` labels row i of `fer`; lengths must match.
MergeResult merge_labels(std::span<const FerSample> fer,
                         std::span<const FerPlusVotes> votes);

/// Reads `fer2013.csv` and the FER+ table and merges them.
MergeResult load_dataset(const std::filesystem::path& fer_csv,
                         const std::filesystem::path& ferplus_csv);

std::array<std::size_t, kNumEmotions> class_histogram(
    std::span<const LabeledSample> samples, Usage usage);

std::vector<LabeledSample> select_usage(std::span<const LabeledSample> samples,
                                        Usage usage);

// --- image preprocessing ----------------------------------------------------

/// value / 255 into [0,1], shape [1,48,48]. No mean subtraction; serving
/// uses the same convention.
Tensor<float> normalize_image(const PixelGrid& pixels);

struct EraseOptions {
  double p = 0.5;
  std::pair<double, double> area_range{0.02, 0.33};
  std::pair<double, double> aspect_range{0.3, 3.33};
  int max_attempts = 10;
};

struct EraseRegion {
  std::size_t x = 0, y = 0, w = 0, h = 0;
};

struct EraseResult {
  Tensor<float> image;
  std::optional<EraseRegion> region;  // absent when nothing was erased
};

/// With probability p, fills one rectangle of every channel with i.i.d.
/// uniform [0,1) noise. Area fraction and aspect ratio (h/w) are drawn
/// uniformly from their ranges; a draw whose rounded rectangle does not fit
/// (or whose rounded area leaves the range) is redrawn, up to max_attempts,
/// after which the image is returned unchanged.
EraseResult random_erase(const Tensor<float>& image, Rng& rng,
                         const EraseOptions& options = {});

/// Mirrors the last axis.
Tensor<float> horizontal_flip(const Tensor<float>& image);

}  // namespace fer
