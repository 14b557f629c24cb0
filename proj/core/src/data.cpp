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

#include "fer/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "fer/error.hpp"

namespace fer {

namespace {

constexpr std::string_view kFerHeader = "emotion,pixels,Usage";
constexpr std::array<std::string_view, 11> kFerPlusColumns = {
    "Image name", "neutral", "happiness", "surprise", "sadness", "anger",
    "disgust",    "fear",    "contempt",  "unknown",  "NF"};

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

bool getline_trimmed(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

std::optional<int> parse_int(std::string_view text) {
  int value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) return std::nullopt;
  return value;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view usage_name(Usage usage) {
  switch (usage) {
    case Usage::training: return "Training";
    case Usage::public_test: return "PublicTest";
    case Usage::private_test: return "PrivateTest";
  }
  return "";
}

std::optional<Usage> parse_usage(std::string_view text) {
  if (text == "Training") return Usage::training;
  if (text == "PublicTest") return Usage::public_test;
  if (text == "PrivateTest") return Usage::private_test;
  return std::nullopt;
}

std::vector<FerSample> parse_fer2013_csv(std::istream& in) {
  std::string line;
  if (!getline_trimmed(in, line)) throw ParseError(0, "missing header");
  if (line != kFerHeader) {
    throw ParseError(0, "expected header '" + std::string(kFerHeader) +
                            "', got '" + line + "'");
  }
  std::vector<FerSample> samples;
  std::size_t row = 0;
  while (getline_trimmed(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 3) {
      throw ParseError(row, "expected 3 columns, got " +
                                std::to_string(cols.size()));
    }
    FerSample s;
    const auto label = parse_int(cols[0]);
    if (!label) throw ParseError(row, "non-integer emotion '" +
                                          std::string(cols[0]) + "'");
    if (*label < 0 || *label > 6) {
      throw ParseError(row, "emotion " + std::to_string(*label) +
                                " outside [0,6]");
    }
    s.fer_label = *label;

    std::size_t count = 0;
    std::string_view px = cols[1];
    std::size_t pos = 0;
    while (pos < px.size()) {
      const std::size_t next = std::min(px.find(' ', pos), px.size());
      const std::string_view token = px.substr(pos, next - pos);
      pos = next + 1;
      if (token.empty()) continue;
      const auto v = parse_int(token);
      if (!v || *v < 0 || *v > 255) {
        throw ParseError(row, "bad pixel value '" + std::string(token) + "'");
      }
      if (count >= kImagePixels) {
        throw ParseError(row, "more than 2304 pixel values");
      }
      s.pixels[count++] = static_cast<std::uint8_t>(*v);
    }
    if (count != kImagePixels) {
      throw ParseError(row, "expected 2304 pixel values, got " +
                                std::to_string(count));
    }
    const auto usage = parse_usage(cols[2]);
    if (!usage) {
      throw ParseError(row, "unknown usage '" + std::string(cols[2]) + "'");
    }
    s.usage = *usage;
    samples.push_back(s);
  }
  return samples;
}

void write_fer2013_csv(std::ostream& out, std::span<const FerSample> samples) {
  out << kFerHeader << '\n';
  for (const FerSample& s : samples) {
    out << s.fer_label << ',';
    for (std::size_t i = 0; i < kImagePixels; ++i) {
      if (i) out << ' ';
      out << static_cast<int>(s.pixels[i]);
    }
    out << ',' << usage_name(s.usage) << '\n';
  }
}

std::vector<FerPlusVotes> parse_ferplus_csv(std::istream& in) {
  std::string line;
  if (!getline_trimmed(in, line)) throw ParseError(0, "missing header");
  {
    const auto cols = split(line, ',');
    bool ok = cols.size() == 12 && iequals(cols[0], "usage");
    for (std::size_t i = 0; ok && i < kFerPlusColumns.size(); ++i) {
      ok = cols[i + 1] == kFerPlusColumns[i];
    }
    if (!ok) throw ParseError(0, "unexpected FER+ header '" + line + "'");
  }
  std::vector<FerPlusVotes> rows;
  std::size_t row = 0;
  while (getline_trimmed(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 12) {
      throw ParseError(row, "expected 12 columns, got " +
                                std::to_string(cols.size()));
    }
    FerPlusVotes v;
    v.usage = std::string(cols[0]);
    v.image_name = std::string(cols[1]);
    for (std::size_t i = 0; i < 10; ++i) {
      const auto c = parse_int(cols[i + 2]);
      if (!c || *c < 0) {
        throw ParseError(row, "bad vote count '" + std::string(cols[i + 2]) +
                                  "' in column " +
                                  std::string(kFerPlusColumns[i + 1]));
      }
      v.counts[i] = *c;
    }
    rows.push_back(std::move(v));
  }
  return rows;
}

void write_ferplus_csv(std::ostream& out,
                       std::span<const FerPlusVotes> votes) {
  out << "Usage";
  for (std::string_view c : kFerPlusColumns) out << ',' << c;
  out << '\n';
  for (const FerPlusVotes& v : votes) {
    out << v.usage << ',' << v.image_name;
    for (int c : v.counts) out << ',' << c;
    out << '\n';
  }
}

MergeResult merge_labels(std::span<const FerSample> fer,
                         std::span<const FerPlusVotes> votes) {
  if (fer.size() != votes.size()) {
    throw InvalidArgument("merge_labels: " + std::to_string(fer.size()) +
                          " FER2013 rows vs " + std::to_string(votes.size()) +
                          " FER+ rows");
  }
  MergeResult result;
  for (std::size_t i = 0; i < fer.size(); ++i) {
    const auto& c = votes[i].counts;
    const int top = *std::max_element(c.begin(), c.end());
    if (top == 0) {
      ++result.stats.no_votes;
      continue;
    }
    const auto holds_strict_max = [&](std::size_t col) {
      return c[col] == top && std::count(c.begin(), c.end(), top) == 1;
    };
    if (holds_strict_max(kUnknown) || holds_strict_max(kNotAFace)) {
      ++result.stats.unknown_or_not_face;
      continue;
    }
    // max_element returns the first maximum, which is the tie rule.
    const auto win = std::max_element(c.begin(), c.begin() + kNumEmotions);
    if (*win < kMinWinningVotes) {
      ++result.stats.weak_winner;
      continue;
    }
    result.samples.push_back(
        {fer[i].pixels, static_cast<int>(win - c.begin()), fer[i].usage});
  }
  result.stats.kept = result.samples.size();
  return result;
}

MergeResult load_dataset(const std::filesystem::path& fer_csv,
                         const std::filesystem::path& ferplus_csv) {
  std::ifstream fer_in(fer_csv);
  if (!fer_in) throw LoadError("cannot open " + fer_csv.string());
  std::ifstream plus_in(ferplus_csv);
  if (!plus_in) {
    throw LoadError("cannot open " + ferplus_csv.string());
  }
  const auto fer = parse_fer2013_csv(fer_in);
  const auto votes = parse_ferplus_csv(plus_in);
  return merge_labels(fer, votes);
}

std::array<std::size_t, kNumEmotions> class_histogram(
    std::span<const LabeledSample> samples, Usage usage) {
  std::array<std::size_t, kNumEmotions> counts{};
  for (const LabeledSample& s : samples) {
    if (s.usage == usage) ++counts.at(static_cast<std::size_t>(s.label8));
  }
  return counts;
}

std::vector<LabeledSample> select_usage(std::span<const LabeledSample> samples,
                                        Usage usage) {
  std::vector<LabeledSample> out;
  std::copy_if(samples.begin(), samples.end(), std::back_inserter(out),
               [usage](const LabeledSample& s) { return s.usage == usage; });
  return out;
}

Tensor<float> normalize_image(const PixelGrid& pixels) {
  Tensor<float> t({1, kImageSide, kImageSide});
  for (std::size_t i = 0; i < kImagePixels; ++i) {
    t[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return t;
}

EraseResult random_erase(const Tensor<float>& image, Rng& rng,
                         const EraseOptions& options) {
  if (!(options.p >= 0.0 && options.p <= 1.0)) {
    throw InvalidArgument("random_erase: p must be in [0,1]");
  }
  if (image.rank() != 3) {
    throw InvalidArgument("random_erase: expected [C,H,W], got " +
                          shape_string(image.shape()));
  }
  EraseResult result{image, std::nullopt};
  if (!rng.bernoulli(options.p)) return result;

  const std::size_t channels = image.dim(0), height = image.dim(1),
                    width = image.dim(2);
  const double area = static_cast<double>(height * width);
  const auto [area_lo, area_hi] = options.area_range;
  const auto [aspect_lo, aspect_hi] = options.aspect_range;
  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    const double target = rng.uniform(area_lo, area_hi) * area;
    const double aspect = rng.uniform(aspect_lo, aspect_hi);
    const auto h = static_cast<std::size_t>(std::lround(std::sqrt(target * aspect)));
    const auto w = static_cast<std::size_t>(std::lround(std::sqrt(target / aspect)));
    if (h == 0 || w == 0 || h > height || w > width) continue;
    const double fraction = static_cast<double>(h * w) / area;
    if (fraction < area_lo || fraction > area_hi) continue;

    const auto x = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(width - w)));
    const auto y = static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<std::int64_t>(height - h)));
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t r = y; r < y + h; ++r) {
        float* row = result.image.data() + (c * height + r) * width;
        for (std::size_t col = x; col < x + w; ++col) {
          row[col] = static_cast<float>(rng.uniform());
        }
      }
    }
    result.region = EraseRegion{x, y, w, h};
    return result;
  }
  return result;
}

Tensor<float> horizontal_flip(const Tensor<float>& image) {
  Tensor<float> out = image;
  const std::size_t width = image.shape().back();
  for (std::size_t start = 0; start < out.size(); start += width) {
    std::reverse(out.data() + start, out.data() + start + width);
  }
  return out;
}

}  // namespace fer
