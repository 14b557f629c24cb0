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

#include "fer/detect.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "fer/error.hpp"

namespace fer {

IntegralImage::IntegralImage(GrayView gray)
    : width_(gray.width),
      height_(gray.height),
      sums_((gray.width + 1) * (gray.height + 1), 0),
      squared_((gray.width + 1) * (gray.height + 1), 0) {
  if (gray.pixels.size() != gray.width * gray.height) {
    throw InvalidArgument("IntegralImage: pixel buffer does not match size");
  }
  const std::size_t stride = width_ + 1;
  for (std::size_t y = 0; y < height_; ++y) {
    std::int64_t row = 0, row_sq = 0;
    for (std::size_t x = 0; x < width_; ++x) {
      const std::int64_t v = gray.pixels[y * width_ + x];
      row += v;
      row_sq += v * v;
      sums_[(y + 1) * stride + x + 1] = sums_[y * stride + x + 1] + row;
      squared_[(y + 1) * stride + x + 1] = squared_[y * stride + x + 1] + row_sq;
    }
  }
}

// --- cascade XML ------------------------------------------------------------

namespace {

namespace pt = boost::property_tree;

template <typename V>
std::vector<V> parse_numbers(const std::string& text, const std::string& path) {
  std::istringstream in(text);
  std::vector<V> out;
  std::string token;
  while (in >> token) {
    std::istringstream t(token);
    V v;
    if (!(t >> v)) throw LoadError(path + ": bad number '" + token + "'");
    // "3." style trailing dots are valid floats; anything else is not.
    char rest;
    if (t >> rest && !(rest == '.' && !(t >> rest))) {
      throw LoadError(path + ": bad number '" + token + "'");
    }
    out.push_back(v);
  }
  return out;
}

const pt::ptree& child(const pt::ptree& node, const std::string& name,
                       const std::string& path) {
  const auto it = node.find(name);
  if (it == node.not_found()) {
    throw LoadError(path + ": missing element <" + name + ">");
  }
  return it->second;
}

template <typename V>
V scalar(const pt::ptree& node, const std::string& name,
         const std::string& path) {
  const std::string p = path + "/" + name;
  const auto values = parse_numbers<double>(child(node, name, path).data(), p);
  if (values.size() != 1) throw LoadError(p + ": expected one number");
  return static_cast<V>(values[0]);
}

// `<_>` children, skipping attributes and comments.
std::vector<const pt::ptree*> items(const pt::ptree& node) {
  std::vector<const pt::ptree*> out;
  for (const auto& [key, value] : node) {
    if (key == "_") out.push_back(&value);
  }
  return out;
}

std::string item_path(const std::string& path, std::size_t i) {
  return path + "/_[" + std::to_string(i) + "]";
}

}  // namespace

void CascadeModel::validate() const {
  if (window_width <= 0 || window_height <= 0) {
    throw LoadError("cascade: window size must be positive");
  }
  if (stages.empty()) throw LoadError("cascade/stages: no stages");
  for (std::size_t f = 0; f < features.size(); ++f) {
    const auto& rects = features[f].rects;
    const std::string path = "cascade/features/_[" + std::to_string(f) + "]";
    if (rects.empty() || rects.size() > 3) {
      throw LoadError(path + "/rects: expected 1 to 3 rectangles");
    }
    for (std::size_t r = 0; r < rects.size(); ++r) {
      const HaarRect& rc = rects[r];
      if (rc.x < 0 || rc.y < 0 || rc.w <= 0 || rc.h <= 0 ||
          rc.x + rc.w > window_width || rc.y + rc.h > window_height) {
        throw LoadError(path + "/rects/_[" + std::to_string(r) +
                        "]: rectangle outside the " +
                        std::to_string(window_width) + "x" +
                        std::to_string(window_height) + " window");
      }
    }
  }
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const std::string spath = "cascade/stages/_[" + std::to_string(s) + "]";
    if (stages[s].classifiers.empty()) {
      throw LoadError(spath + "/weakClassifiers: empty stage");
    }
    for (std::size_t w = 0; w < stages[s].classifiers.size(); ++w) {
      const WeakClassifier& wc = stages[s].classifiers[w];
      const std::string wpath =
          spath + "/weakClassifiers/_[" + std::to_string(w) + "]";
      if (wc.nodes.empty()) throw LoadError(wpath + "/internalNodes: empty");
      for (const HaarNode& node : wc.nodes) {
        if (node.feature >= features.size()) {
          throw LoadError(wpath + "/internalNodes: feature index " +
                          std::to_string(node.feature) + " out of range (" +
                          std::to_string(features.size()) + " features)");
        }
        for (int c : {node.left, node.right}) {
          const bool ok =
              c > 0 ? static_cast<std::size_t>(c) < wc.nodes.size()
                    : static_cast<std::size_t>(-c) < wc.leaf_values.size();
          if (!ok) {
            throw LoadError(wpath + "/internalNodes: child " +
                            std::to_string(c) + " out of range");
          }
        }
      }
    }
  }
}

CascadeModel load_cascade(std::istream& in) {
  pt::ptree doc;
  try {
    pt::read_xml(in, doc, pt::xml_parser::trim_whitespace);
  } catch (const pt::xml_parser_error& e) {
    throw LoadError(std::string("cascade: malformed XML: ") + e.what());
  }
  const pt::ptree* root = &doc;
  if (doc.find("opencv_storage") != doc.not_found()) {
    root = &doc.find("opencv_storage")->second;
  }
  const pt::ptree& cascade = child(*root, "cascade", "opencv_storage");
  const std::string cpath = "cascade";

  const auto type_it = cascade.find("featureType");
  if (type_it != cascade.not_found() && type_it->second.data() != "HAAR") {
    throw LoadError(cpath + "/featureType: only HAAR is supported, got '" +
                    type_it->second.data() + "'");
  }

  CascadeModel model;
  model.window_width = scalar<int>(cascade, "width", cpath);
  model.window_height = scalar<int>(cascade, "height", cpath);

  const auto stage_nodes = items(child(cascade, "stages", cpath));
  for (std::size_t s = 0; s < stage_nodes.size(); ++s) {
    const std::string spath = item_path(cpath + "/stages", s);
    CascadeStage stage;
    stage.threshold = scalar<double>(*stage_nodes[s], "stageThreshold", spath);
    const auto weak_nodes =
        items(child(*stage_nodes[s], "weakClassifiers", spath));
    for (std::size_t w = 0; w < weak_nodes.size(); ++w) {
      const std::string wpath = item_path(spath + "/weakClassifiers", w);
      WeakClassifier wc;
      const auto raw = parse_numbers<double>(
          child(*weak_nodes[w], "internalNodes", wpath).data(),
          wpath + "/internalNodes");
      if (raw.empty() || raw.size() % 4 != 0) {
        throw LoadError(wpath +
                        "/internalNodes: expected groups of 4 numbers "
                        "(left right feature threshold)");
      }
      for (std::size_t i = 0; i < raw.size(); i += 4) {
        if (raw[i + 2] < 0) {
          throw LoadError(wpath + "/internalNodes: negative feature index");
        }
        wc.nodes.push_back({static_cast<int>(raw[i]),
                            static_cast<int>(raw[i + 1]),
                            static_cast<std::size_t>(raw[i + 2]), raw[i + 3]});
      }
      wc.leaf_values = parse_numbers<double>(
          child(*weak_nodes[w], "leafValues", wpath).data(),
          wpath + "/leafValues");
      stage.classifiers.push_back(std::move(wc));
    }
    model.stages.push_back(std::move(stage));
  }

  const auto stage_num = cascade.find("stageNum");
  if (stage_num != cascade.not_found()) {
    const auto n = scalar<std::size_t>(cascade, "stageNum", cpath);
    if (n != model.stages.size()) {
      throw LoadError(cpath + "/stageNum: declares " + std::to_string(n) +
                      " stages, found " + std::to_string(model.stages.size()));
    }
  }

  const auto feature_nodes = items(child(cascade, "features", cpath));
  for (std::size_t f = 0; f < feature_nodes.size(); ++f) {
    const std::string fpath = item_path(cpath + "/features", f);
    if (feature_nodes[f]->find("tilted") != feature_nodes[f]->not_found() &&
        scalar<int>(*feature_nodes[f], "tilted", fpath) != 0) {
      throw LoadError(fpath + "/tilted: tilted features are not supported");
    }
    HaarFeature feature;
    const auto rect_nodes = items(child(*feature_nodes[f], "rects", fpath));
    for (std::size_t r = 0; r < rect_nodes.size(); ++r) {
      const std::string rpath = item_path(fpath + "/rects", r);
      const auto v = parse_numbers<double>(rect_nodes[r]->data(), rpath);
      if (v.size() != 5) {
        throw LoadError(rpath + ": expected 'x y w h weight'");
      }
      feature.rects.push_back({static_cast<int>(v[0]), static_cast<int>(v[1]),
                               static_cast<int>(v[2]), static_cast<int>(v[3]),
                               v[4]});
    }
    model.features.push_back(std::move(feature));
  }

  model.validate();
  return model;
}

CascadeModel load_cascade(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open cascade file " + path.string());
  return load_cascade(in);
}

// --- evaluation -------------------------------------------------------------

namespace {

struct ScaledRect {
  std::size_t dx, dy, w, h;  // offset from the window origin
  double weight;
};

struct ScaledFeature {
  ScaledRect rects[3];
  std::size_t count = 0;
};

/// The cascade's features resolved for one scale.
class ScaledCascade {
 public:
  ScaledCascade(const CascadeModel& model, double scale) : model_(model) {
    window_w_ = static_cast<std::size_t>(std::lround(model.window_width * scale));
    window_h_ =
        static_cast<std::size_t>(std::lround(model.window_height * scale));
    const auto inset = static_cast<std::size_t>(std::lround(scale));
    norm_ = {inset, inset,
             static_cast<std::size_t>(
                 std::lround((model.window_width - 2) * scale)),
             static_cast<std::size_t>(
                 std::lround((model.window_height - 2) * scale)),
             1.0};
    if (norm_.w == 0 || norm_.h == 0 || norm_.dx + norm_.w > window_w_ ||
        norm_.dy + norm_.h > window_h_) {
      norm_ = {0, 0, window_w_, window_h_, 1.0};
    }
    inv_area_ = 1.0 / static_cast<double>(norm_.w * norm_.h);
    features_.reserve(model.features.size());
    for (const HaarFeature& f : model.features) {
      ScaledFeature sf;
      for (const HaarRect& r : f.rects) {
        ScaledRect s;
        s.dx = static_cast<std::size_t>(std::lround(r.x * scale));
        s.dy = static_cast<std::size_t>(std::lround(r.y * scale));
        s.w = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(r.w * scale)));
        s.h = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(r.h * scale)));
        s.dx = std::min(s.dx, window_w_ - s.w);
        s.dy = std::min(s.dy, window_h_ - s.h);
        const double ideal = static_cast<double>(r.w) * r.h * scale * scale;
        s.weight = r.weight * ideal / static_cast<double>(s.w * s.h) * inv_area_;
        sf.rects[sf.count++] = s;
      }
      features_.push_back(sf);
    }
  }

  std::size_t window_w() const { return window_w_; }
  std::size_t window_h() const { return window_h_; }

  bool accepts(const IntegralImage& ii, std::size_t x, std::size_t y) const {
    const double area = static_cast<double>(norm_.w * norm_.h);
    const double sum = static_cast<double>(
        ii.rect_sum(x + norm_.dx, y + norm_.dy, norm_.w, norm_.h));
    const double sq = static_cast<double>(
        ii.rect_squared_sum(x + norm_.dx, y + norm_.dy, norm_.w, norm_.h));
    const double mean = sum / area;
    const double var = sq / area - mean * mean;
    const double stddev = std::max(1.0, var > 0.0 ? std::sqrt(var) : 0.0);

    for (const CascadeStage& stage : model_.stages) {
      double stage_sum = 0.0;
      for (const WeakClassifier& wc : stage.classifiers) {
        int idx = 0;
        while (true) {
          const HaarNode& node = wc.nodes[static_cast<std::size_t>(idx)];
          const double value = feature_value(ii, node.feature, x, y);
          const int next =
              value < node.threshold * stddev ? node.left : node.right;
          if (next <= 0) {
            stage_sum += wc.leaf_values[static_cast<std::size_t>(-next)];
            break;
          }
          idx = next;
        }
      }
      if (stage_sum < stage.threshold) return false;
    }
    return true;
  }

 private:
  double feature_value(const IntegralImage& ii, std::size_t f, std::size_t x,
                       std::size_t y) const {
    const ScaledFeature& sf = features_[f];
    double v = 0.0;
    for (std::size_t i = 0; i < sf.count; ++i) {
      const ScaledRect& r = sf.rects[i];
      v += r.weight *
           static_cast<double>(ii.rect_sum(x + r.dx, y + r.dy, r.w, r.h));
    }
    return v;
  }

  const CascadeModel& model_;
  std::size_t window_w_ = 0, window_h_ = 0;
  ScaledRect norm_{};
  double inv_area_ = 1.0;
  std::vector<ScaledFeature> features_;
};

}  // namespace

bool evaluate_window(const CascadeModel& model, const IntegralImage& ii,
                     std::size_t x, std::size_t y, double scale) {
  if (!(scale > 0.0)) throw InvalidArgument("evaluate_window: scale <= 0");
  const ScaledCascade scaled(model, scale);
  if (x + scaled.window_w() > ii.width() ||
      y + scaled.window_h() > ii.height()) {
    throw InvalidArgument("evaluate_window: window extends past the image");
  }
  return scaled.accepts(ii, x, y);
}

std::vector<DetectionBox> detect_multiscale(const CascadeModel& model,
                                            GrayView gray,
                                            const DetectOptions& options) {
  if (gray.width == 0 || gray.height == 0) return {};
  if (!(options.scale_factor > 1.0)) {
    throw InvalidArgument("detect_multiscale: scale_factor must be > 1");
  }
  const IntegralImage ii(gray);
  std::vector<DetectionBox> raw;
  for (double scale = 1.0;; scale *= options.scale_factor) {
    const ScaledCascade scaled(model, scale);
    const std::size_t ww = scaled.window_w(), wh = scaled.window_h();
    if (ww > gray.width || wh > gray.height) break;
    if (static_cast<int>(std::min(ww, wh)) < options.min_size) continue;
    const auto step =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(scale)));
    for (std::size_t y = 0; y + wh <= gray.height; y += step) {
      for (std::size_t x = 0; x + ww <= gray.width; x += step) {
        if (scaled.accepts(ii, x, y)) {
          raw.push_back({static_cast<int>(x), static_cast<int>(y),
                         static_cast<int>(ww), static_cast<int>(wh), 1});
        }
      }
    }
  }
  return group_rectangles(raw, options.min_neighbors, options.group_eps);
}

namespace {

bool similar(const DetectionBox& a, const DetectionBox& b, double eps) {
  const double delta =
      eps * (std::min(a.w, b.w) + std::min(a.h, b.h)) * 0.5;
  return std::abs(a.x - b.x) <= delta && std::abs(a.y - b.y) <= delta &&
         std::abs(a.x + a.w - b.x - b.w) <= delta &&
         std::abs(a.y + a.h - b.y - b.h) <= delta;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

std::vector<DetectionBox> group_rectangles(std::span<const DetectionBox> raw,
                                           int min_neighbors, double eps) {
  std::vector<std::size_t> parent(raw.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (similar(raw[i], raw[j], eps)) {
        const std::size_t a = find_root(parent, i), b = find_root(parent, j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }
  struct Accum {
    double x = 0, y = 0, w = 0, h = 0;
    int n = 0;
  };
  std::vector<Accum> acc(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Accum& a = acc[find_root(parent, i)];
    a.x += raw[i].x;
    a.y += raw[i].y;
    a.w += raw[i].w;
    a.h += raw[i].h;
    ++a.n;
  }
  std::vector<DetectionBox> classes;
  for (const Accum& a : acc) {
    if (a.n == 0 || a.n <= min_neighbors) continue;
    const double s = 1.0 / a.n;
    classes.push_back({static_cast<int>(std::lround(a.x * s)),
                       static_cast<int>(std::lround(a.y * s)),
                       static_cast<int>(std::lround(a.w * s)),
                       static_cast<int>(std::lround(a.h * s)), a.n});
  }
  // Drop a box lying inside a better-supported one (eps slack on each edge).
  std::vector<DetectionBox> out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const DetectionBox& r1 = classes[i];
    const int n1 = r1.neighbor_count;
    bool nested = false;
    for (std::size_t j = 0; j < classes.size() && !nested; ++j) {
      const DetectionBox& r2 = classes[j];
      const int n2 = r2.neighbor_count;
      if (i == j) continue;
      const int dx = static_cast<int>(std::lround(r2.w * eps));
      const int dy = static_cast<int>(std::lround(r2.h * eps));
      nested = r1.x >= r2.x - dx && r1.y >= r2.y - dy &&
               r1.x + r1.w <= r2.x + r2.w + dx &&
               r1.y + r1.h <= r2.y + r2.h + dy &&
               (n2 > std::max(3, n1) || n1 < 3);
    }
    if (!nested) out.push_back(r1);
  }
  std::sort(out.begin(), out.end(),
            [](const DetectionBox& a, const DetectionBox& b) {
              if (a.y != b.y) return a.y < b.y;
              if (a.x != b.x) return a.x < b.x;
              if (a.w != b.w) return a.w < b.w;
              return a.h < b.h;
            });
  return out;
}

double iou(const DetectionBox& a, const DetectionBox& b) {
  const int x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  const double inter = static_cast<double>(std::max(0, x1 - x0)) *
                       std::max(0, y1 - y0);
  const double uni = static_cast<double>(a.w) * a.h +
                     static_cast<double>(b.w) * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace fer
