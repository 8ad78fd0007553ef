// Copyright 2026 The tryon Authors. All rights reserved.
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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "tryon/agnostic.hpp"
#include "tryon/data_io.hpp"
#include "tryon/raster.hpp"

namespace tryon {

// Area-fraction range, aspect-ratio (w/h) range and output size of a random
// resized crop. Training uses scale (0.5, 1.0); test sets are pre-cropped at a
// fixed scale s, i.e. the range (s, s).
struct CropConfig {
  double scale_lo = 0.5;
  double scale_hi = 1.0;
  double ratio_lo = 3.0 / 4.0;
  double ratio_hi = 4.0 / 3.0;
  int out_h = 512;
  int out_w = 384;
  int max_attempts = 10;

  static CropConfig fixed_scale(double s, int out_h = 512, int out_w = 384) {
    CropConfig c;
    c.scale_lo = c.scale_hi = s;
    c.out_h = out_h;
    c.out_w = out_w;
    return c;
  }

  void validate() const {
    if (!(scale_lo > 0.0 && scale_lo <= scale_hi && scale_hi <= 1.0)) {
      throw ConfigError("crop scale must satisfy 0 < scale_lo <= scale_hi <= 1");
    }
    if (!(ratio_lo > 0.0 && ratio_lo <= ratio_hi)) {
      throw ConfigError("crop ratio must satisfy 0 < ratio_lo <= ratio_hi");
    }
    if (out_h <= 0 || out_w <= 0) throw ConfigError("crop output size must be positive");
    if (max_attempts < 0) throw ConfigError("crop max_attempts must be >= 0");
  }
};

// Test-set crops at or below this scale are the "micro-scale" regime.
inline constexpr double kMicroScale = 0.5;
inline bool is_micro_scale(double scale) { return scale <= kMicroScale; }

struct CropWindow {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
  int src_h = 0;
  int src_w = 0;

  static CropWindow full(int h, int w) { return {0, 0, h, w, h, w}; }

  bool valid() const {
    return height >= 1 && width >= 1 && top >= 0 && left >= 0 && top + height <= src_h &&
           left + width <= src_w;
  }
  double area_fraction() const {
    return static_cast<double>(height) * width / (static_cast<double>(src_h) * src_w);
  }
  Region region() const { return {top, left, height, width}; }

  friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

inline nlohmann::json window_to_json(const CropWindow& w) {
  return {{"top", w.top},       {"left", w.left},   {"height", w.height},
          {"width", w.width},   {"src_h", w.src_h}, {"src_w", w.src_w}};
}

inline CropWindow window_from_json(const nlohmann::json& j) {
  return {j.at("top").get<int>(),    j.at("left").get<int>(),  j.at("height").get<int>(),
          j.at("width").get<int>(),  j.at("src_h").get<int>(), j.at("src_w").get<int>()};
}

// ---------------------------------------------------------------------------
// Seeding. All crop randomness flows from an explicitly passed engine; per
// sample engines are derived from (base seed, sample index, epoch, stream).

using CropRng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::uint64_t epoch = 0,
                                 std::uint64_t stream = 0) {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ index);
  h = splitmix64(h ^ (epoch * 0x632be59bd9b4e019ULL));
  return splitmix64(h ^ (stream * 0x85157af5ULL));
}

// Python-style round(): half to even.
inline int round_half_even(double v) { return static_cast<int>(std::nearbyint(v)); }

struct CropDraw {
  CropWindow window;
  bool fallback = false;  // every attempt was rejected; centred crop used
};

// Random-resized-crop window, same procedure as torchvision's
// RandomResizedCrop.get_params: up to max_attempts draws of (area, log-uniform
// aspect); on exhaustion a centred crop with the aspect clamped into range.
inline CropDraw draw_crop_window(int src_h, int src_w, const CropConfig& cfg, CropRng& rng) {
  cfg.validate();
  if (src_h < 1 || src_w < 1) throw ConfigError("source size must be positive");
  const double area = static_cast<double>(src_h) * src_w;
  const double log_lo = std::log(cfg.ratio_lo), log_hi = std::log(cfg.ratio_hi);
  std::uniform_real_distribution<double> scale_dist(cfg.scale_lo, cfg.scale_hi);
  std::uniform_real_distribution<double> log_ratio_dist(log_lo, log_hi);

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    const double target_area = area * scale_dist(rng);
    const double aspect = std::exp(log_ratio_dist(rng));
    const int w = round_half_even(std::sqrt(target_area * aspect));
    const int h = round_half_even(std::sqrt(target_area / aspect));
    if (0 < w && w <= src_w && 0 < h && h <= src_h) {
      const int top = std::uniform_int_distribution<int>(0, src_h - h)(rng);
      const int left = std::uniform_int_distribution<int>(0, src_w - w)(rng);
      return {{top, left, h, w, src_h, src_w}, false};
    }
  }

  const double in_ratio = static_cast<double>(src_w) / src_h;
  int w = src_w, h = src_h;
  if (in_ratio < cfg.ratio_lo) {
    h = round_half_even(w / cfg.ratio_lo);
  } else if (in_ratio > cfg.ratio_hi) {
    w = round_half_even(h * cfg.ratio_hi);
  }
  return {{(src_h - h) / 2, (src_w - w) / 2, h, w, src_h, src_w}, true};
}

inline CropWindow sample_crop_window(int src_h, int src_w, const CropConfig& cfg, CropRng& rng) {
  return draw_crop_window(src_h, src_w, cfg, rng).window;
}

// Maps keypoints into the resized window; points that fall outside the
// output raster become absent.
inline PoseKeypoints transform_keypoints(const PoseKeypoints& kps, const CropWindow& win, int out_h,
                                         int out_w) {
  PoseKeypoints out = kps;
  const double sx = static_cast<double>(out_w) / win.width;
  const double sy = static_cast<double>(out_h) / win.height;
  for (auto& p : out.points) {
    if (!p.visible()) continue;
    p.x = (p.x - win.left) * sx;
    p.y = (p.y - win.top) * sy;
    if (!(p.x >= 0.0 && p.x < out_w && p.y >= 0.0 && p.y < out_h)) p.confidence = 0.0;
  }
  return out;
}

inline SegmentationMap crop_parse(const SegmentationMap& m, const CropWindow& win, int out_h,
                                  int out_w) {
  return {resample_nearest(m.labels, win.region(), out_h, out_w), m.palette};
}

// Everything one training/inference step consumes for a sample after the
// crop: person side cropped with one shared window, garment side resized.
struct CroppedBundle {
  std::string sample_id;
  CropWindow window;
  std::uint64_t window_id = 0;
  ImageF person_image;
  SegmentationMap parse;
  ImageF agnostic_image;
  SegmentationMap agnostic_parse;
  std::optional<ImageF> pose_map;  // only when a pre-rendered map was passed
  PoseKeypoints keypoints;
  ImageF cloth_image;
  LabelRaster cloth_mask;
};

struct CropSampleOptions {
  bool include_cloth = false;  // crop the garment with the person window too
  std::uint64_t window_id = 0;
};

inline CroppedBundle crop_sample(const Sample& sample, const AgnosticResult& agnostic,
                                 const CropWindow& win, const CropConfig& cfg,
                                 const std::optional<ImageF>& pose_map = std::nullopt,
                                 const CropSampleOptions& opts = {}) {
  const int h = sample.height(), w = sample.width();
  if (!win.valid() || win.src_h != h || win.src_w != w) {
    throw GeometryError("crop window does not fit sample " + sample.sample_id);
  }
  if (!agnostic.image.same_size(h, w) || !agnostic.parse.labels.same_size(h, w) ||
      (pose_map && !pose_map->same_size(h, w))) {
    throw GeometryError("agnostic/pose rasters do not match sample " + sample.sample_id);
  }
  const Region r = win.region();
  const int oh = cfg.out_h, ow = cfg.out_w;
  CroppedBundle b;
  b.sample_id = sample.sample_id;
  b.window = win;
  b.window_id = opts.window_id;
  b.person_image = resample_bilinear(sample.person_image, r, oh, ow);
  b.parse = crop_parse(sample.parse, win, oh, ow);
  b.agnostic_image = resample_bilinear(agnostic.image, r, oh, ow);
  b.agnostic_parse = crop_parse(agnostic.parse, win, oh, ow);
  // Heatmaps are smooth fields of position; taps may read past the window.
  if (pose_map) b.pose_map = resample_bilinear(*pose_map, r, full_region(h, w), oh, ow);
  b.keypoints = transform_keypoints(sample.keypoints, win, oh, ow);
  const Region cloth_region = opts.include_cloth ? r : full_region(h, w);
  b.cloth_image = resample_bilinear(sample.cloth_image, cloth_region, oh, ow);
  b.cloth_mask = resample_nearest(sample.cloth_mask, cloth_region, oh, ow);
  return b;
}

// ---------------------------------------------------------------------------
// Test-set pre-cropping.

struct PrecropEntry {
  std::string id;
  CropWindow window;
};

struct PrecropReport {
  std::size_t count = 0;
  std::uint64_t seed = 0;
  double scale = 1.0;
  std::vector<PrecropEntry> windows;
};

inline nlohmann::json precrop_manifest_json(const PrecropReport& rep, const CropConfig& cfg) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : rep.windows) {
    auto j = window_to_json(e.window);
    j["id"] = e.id;
    list.push_back(j);
  }
  return {{"seed", rep.seed},
          {"scale", rep.scale},
          {"ratio", {cfg.ratio_lo, cfg.ratio_hi}},
          {"out_h", cfg.out_h},
          {"out_w", cfg.out_w},
          {"windows", list}};
}

inline std::vector<std::string> list_ids(const fs::path& dir, const std::string& ext) {
  std::vector<std::string> ids;
  if (!fs::is_directory(dir)) throw LayoutError("missing directory " + dir.string());
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ext) ids.push_back(e.path().stem().string());
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline constexpr const char* kPrecropManifest = "precrop_manifest.json";

// Crops every test person once at scale range (scale, scale), resizes the
// garments, and writes a dataset with the same layout plus a manifest.
inline PrecropReport precrop_dataset(const fs::path& root, const fs::path& out_root, double scale,
                                     std::uint64_t seed, CropConfig cfg, bool force = false,
                                     const LoadOptions& load_opts = {}) {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("precrop scale must lie in (0,1]");
  cfg.scale_lo = cfg.scale_hi = scale;
  cfg.validate();
  if (fs::exists(out_root) && !fs::is_empty(out_root) && !force) {
    throw ConfigError("output directory " + out_root.string() +
                      " exists and is not empty (use --force)");
  }
  const DatasetPaths src{root, Split::kTest};
  const DatasetPaths dst{out_root, Split::kTest};
  const Palette palette = load_palette(src.palette());
  for (auto sub : kModalityDirs) {
    if (!fs::is_directory(src.split_dir() / sub)) {
      throw LayoutError("missing directory " + (src.split_dir() / sub).string());
    }
    fs::create_directories(dst.split_dir() / sub);
  }

  PrecropReport rep;
  rep.seed = seed;
  rep.scale = scale;
  const auto person_ids = list_ids(src.split_dir() / "image", ".png");
  for (std::size_t n = 0; n < person_ids.size(); ++n) {
    const std::string& id = person_ids[n];
    const Rgb8Image person = read_png_rgb8(src.image(id));
    SegmentationMap parse{read_png_gray(src.parse(id)), palette};
    const PoseKeypoints kps = load_keypoints(src.pose(id));
    if (!parse.labels.same_size(person.height(), person.width())) {
      throw ConsistencyError("sample " + id + ": raster sizes differ across modalities");
    }
    parse.validate();
    CropRng rng(derive_seed(seed, n));
    const CropWindow win = sample_crop_window(person.height(), person.width(), cfg, rng);
    write_png_rgb(dst.image(id), resample_bilinear(person, win.region(), cfg.out_h, cfg.out_w));
    write_png_gray(dst.parse(id), crop_parse(parse, win, cfg.out_h, cfg.out_w).labels);
    save_keypoints(dst.pose(id), transform_keypoints(kps, win, cfg.out_h, cfg.out_w));
    rep.windows.push_back({id, win});
  }
  for (const auto& id : list_ids(src.split_dir() / "cloth", ".png")) {
    const Rgb8Image cloth = read_png_rgb8(src.cloth(id));
    LabelRaster mask = to_binary_mask(read_png_gray(src.cloth_mask(id)),
                                      load_opts.binarize_mask, id);
    const Region full = full_region(cloth.height(), cloth.width());
    write_png_rgb(dst.cloth(id), resample_bilinear(cloth, full, cfg.out_h, cfg.out_w));
    mask = resample_nearest(mask, full, cfg.out_h, cfg.out_w);
    for (auto& v : mask.data()) v = v ? 255 : 0;
    write_png_gray(dst.cloth_mask(id), mask);
  }
  save_palette(dst.palette(), palette);
  for (PairMode m : {PairMode::kPaired, PairMode::kUnpaired}) {
    if (fs::exists(src.pairs(m))) {
      fs::copy_file(src.pairs(m), dst.pairs(m), fs::copy_options::overwrite_existing);
    }
  }
  rep.count = rep.windows.size();
  std::ofstream(out_root / kPrecropManifest) << precrop_manifest_json(rep, cfg).dump(2) << "\n";
  return rep;
}

}  // namespace tryon
