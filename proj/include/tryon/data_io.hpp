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

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tryon/errors.hpp"
#include "tryon/raster.hpp"

namespace tryon {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Segmentation roles and maps.

enum class Role {
  kBackground,
  kHair,
  kFace,
  kNeck,
  kUpperClothes,
  kLowerClothes,
  kArms,
  kLegs,
  kAgnostic,
  kOther,
};

inline constexpr std::array<std::pair<Role, std::string_view>, 10> kRoleNames{{
    {Role::kBackground, "background"},
    {Role::kHair, "hair"},
    {Role::kFace, "face"},
    {Role::kNeck, "neck"},
    {Role::kUpperClothes, "upper_clothes"},
    {Role::kLowerClothes, "lower_clothes"},
    {Role::kArms, "arms"},
    {Role::kLegs, "legs"},
    {Role::kAgnostic, "agnostic"},
    {Role::kOther, "other"},
}};

inline std::string_view role_name(Role r) {
  for (const auto& [role, name] : kRoleNames) {
    if (role == r) return name;
  }
  return "other";
}

inline Role parse_role(std::string_view name) {
  for (const auto& [role, n] : kRoleNames) {
    if (n == name) return role;
  }
  throw PaletteError("unknown role '" + std::string(name) + "'");
}

using Palette = std::map<int, Role>;

// Palette file: JSON object mapping the label integer (as a string key) to a
// role name, e.g. {"0": "background", "4": "upper_clothes"}.
inline Palette load_palette(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LayoutError("missing palette file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw PaletteError("malformed palette " + path.string() + ": " + e.what());
  }
  Palette p;
  for (const auto& [key, value] : j.items()) {
    int label = -1;
    try {
      label = std::stoi(key);
    } catch (const std::exception&) {
      throw PaletteError("non-integer palette key '" + key + "'");
    }
    if (label < 0 || label > 255) throw PaletteError("label out of range: " + key);
    p[label] = parse_role(value.get<std::string>());
  }
  return p;
}

inline void save_palette(const fs::path& path, const Palette& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [label, role] : p) j[std::to_string(label)] = std::string(role_name(role));
  ensure_parent(path);
  std::ofstream(path) << j.dump(2) << "\n";
}

struct SegmentationMap {
  LabelRaster labels;
  Palette palette;

  int height() const { return labels.height(); }
  int width() const { return labels.width(); }

  std::vector<int> labels_with_role(Role r) const {
    std::vector<int> out;
    for (const auto& [label, role] : palette) {
      if (role == r) out.push_back(label);
    }
    return out;
  }

  // The unique label carrying `r`; palette error when absent.
  int label_for(Role r) const {
    const auto ls = labels_with_role(r);
    if (ls.empty()) {
      throw PaletteError("palette has no label for role " + std::string(role_name(r)));
    }
    return ls.front();
  }

  Role role_of(int label) const {
    const auto it = palette.find(label);
    if (it == palette.end()) {
      throw PaletteError("label " + std::to_string(label) + " has no palette entry");
    }
    return it->second;
  }

  // Number of label channels a one-hot encoding needs.
  int num_labels() const { return palette.empty() ? 0 : palette.rbegin()->first + 1; }

  void validate() const {
    if (labels_with_role(Role::kUpperClothes).size() != 1) {
      throw PaletteError("palette must map exactly one label to upper_clothes");
    }
    if (labels_with_role(Role::kBackground).size() != 1) {
      throw PaletteError("palette must map exactly one label to background");
    }
    std::array<bool, 256> seen{};
    for (auto v : labels.data()) seen[v] = true;
    for (int v = 0; v < 256; ++v) {
      if (seen[v] && !palette.contains(v)) {
        throw PaletteError("label " + std::to_string(v) + " has no palette entry");
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Pose keypoints (COCO-18 order).

inline constexpr int kNumKeypoints = 18;

inline constexpr std::array<std::string_view, kNumKeypoints> kCoco18Names{
    "nose",       "neck",       "r_shoulder", "r_elbow", "r_wrist", "l_shoulder",
    "l_elbow",    "l_wrist",    "r_hip",      "r_knee",  "r_ankle", "l_hip",
    "l_knee",     "l_ankle",    "r_eye",      "l_eye",   "r_ear",   "l_ear"};

// Coordinates are continuous pixels with the pixel (i, j) covering
// [j, j+1) x [i, i+1); confidence 0 marks an absent point.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double confidence = 0.0;

  bool visible() const { return confidence > 0.0; }
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

struct PoseKeypoints {
  std::array<Keypoint, kNumKeypoints> points{};
  friend bool operator==(const PoseKeypoints&, const PoseKeypoints&) = default;
};

// Keypoint file: {"keypoints": [[x, y, c], ... 18 rows]}.
inline PoseKeypoints parse_keypoints_json(const nlohmann::json& j) {
  if (!j.contains("keypoints") || !j["keypoints"].is_array()) {
    throw ConsistencyError("pose file lacks a 'keypoints' array");
  }
  const auto& arr = j["keypoints"];
  if (arr.size() != kNumKeypoints) {
    throw ConsistencyError("pose file must hold exactly 18 keypoints, got " +
                           std::to_string(arr.size()));
  }
  PoseKeypoints k;
  for (int n = 0; n < kNumKeypoints; ++n) {
    const auto& row = arr[n];
    if (!row.is_array() || row.size() != 3) {
      throw ConsistencyError("keypoint row " + std::to_string(n) + " must be [x, y, c]");
    }
    k.points[n] = {row[0].get<double>(), row[1].get<double>(), row[2].get<double>()};
    if (k.points[n].confidence < 0.0 || k.points[n].confidence > 1.0) {
      throw ConsistencyError("keypoint confidence outside [0,1]");
    }
  }
  return k;
}

inline PoseKeypoints load_keypoints(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pose file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed pose file " + path.string() + ": " + e.what());
  }
  return parse_keypoints_json(j);
}

inline nlohmann::json keypoints_to_json(const PoseKeypoints& k) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : k.points) arr.push_back({p.x, p.y, p.confidence});
  return {{"keypoints", arr}};
}

inline void save_keypoints(const fs::path& path, const PoseKeypoints& k) {
  ensure_parent(path);
  std::ofstream(path) << keypoints_to_json(k).dump() << "\n";
}

// 18 x H x W heatmaps, channel k an unnormalized Gaussian around keypoint k
// evaluated at pixel centres; absent points give an all-zero channel.
inline ImageF render_pose_map(const PoseKeypoints& kps, int height, int width,
                              double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("pose sigma must be positive");
  ImageF out(kNumKeypoints, height, width, 0.0f);
  const double inv = 1.0 / (2.0 * sigma * sigma);
  std::vector<double> gx(width);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& p = kps.points[k];
    if (!p.visible()) continue;
    for (int j = 0; j < width; ++j) {
      const double dx = j + 0.5 - p.x;
      gx[j] = dx * dx;
    }
    for (int i = 0; i < height; ++i) {
      const double dy = i + 0.5 - p.y;
      for (int j = 0; j < width; ++j) {
        out.at(k, i, j) = static_cast<float>(std::exp(-(gx[j] + dy * dy) * inv));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Samples and pair lists.

enum class Split { kTrain, kTest };
enum class PairMode { kPaired, kUnpaired };

inline std::string split_name(Split s) { return s == Split::kTrain ? "train" : "test"; }
inline std::string mode_name(PairMode m) {
  return m == PairMode::kPaired ? "paired" : "unpaired";
}
inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  throw ConfigError("split must be train or test, got '" + std::string(s) + "'");
}
inline PairMode parse_mode(std::string_view s) {
  if (s == "paired") return PairMode::kPaired;
  if (s == "unpaired") return PairMode::kUnpaired;
  throw ConfigError("mode must be paired or unpaired, got '" + std::string(s) + "'");
}

struct PairList {
  std::vector<std::pair<std::string, std::string>> entries;  // (person, cloth)
  PairMode mode = PairMode::kPaired;

  std::size_t size() const { return entries.size(); }
};

struct Sample {
  std::string sample_id;  // person id
  std::string cloth_id;
  ImageF person_image;   // 3 x H x W, [0,1]
  ImageF cloth_image;    // 3 x H x W, [0,1]
  LabelRaster cloth_mask;  // {0,1}
  SegmentationMap parse;
  PoseKeypoints keypoints;

  int height() const { return person_image.height(); }
  int width() const { return person_image.width(); }

  void validate() const {
    const int h = height(), w = width();
    if (!cloth_image.same_size(h, w) || !cloth_mask.same_size(h, w) ||
        !parse.labels.same_size(h, w)) {
      throw ConsistencyError("sample " + sample_id + ": raster sizes differ across modalities");
    }
    for (auto v : cloth_mask.data()) {
      if (v > 1) throw ConsistencyError("sample " + sample_id + ": cloth mask not binary");
    }
    for (const auto& p : keypoints.points) {
      if (p.visible() && !(p.x >= 0 && p.x < w && p.y >= 0 && p.y < h)) {
        throw ConsistencyError("sample " + sample_id + ": visible keypoint outside raster");
      }
    }
    parse.validate();
  }
};

// Directory layout under <root>/<split>/.
struct DatasetPaths {
  fs::path root;
  Split split = Split::kTrain;

  fs::path split_dir() const { return root / split_name(split); }
  fs::path image(const std::string& id) const { return split_dir() / "image" / (id + ".png"); }
  fs::path cloth(const std::string& id) const { return split_dir() / "cloth" / (id + ".png"); }
  fs::path cloth_mask(const std::string& id) const {
    return split_dir() / "cloth-mask" / (id + ".png");
  }
  fs::path parse(const std::string& id) const {
    return split_dir() / "image-parse" / (id + ".png");
  }
  fs::path pose(const std::string& id) const { return split_dir() / "pose" / (id + ".json"); }
  fs::path palette() const { return root / "palette.json"; }
  fs::path pairs(PairMode m) const {
    return root / (split_name(split) + "_pairs_" + mode_name(m) + ".txt");
  }
};

inline constexpr std::array<std::string_view, 5> kModalityDirs{
    "image", "cloth", "cloth-mask", "image-parse", "pose"};

inline PairList parse_pairs(std::istream& in, PairMode mode, const std::string& origin) {
  PairList list;
  list.mode = mode;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string person, cloth, extra;
    if (!(ls >> person)) continue;  // blank line
    if (!(ls >> cloth) || (ls >> extra)) {
      throw IndexError(origin + ":" + std::to_string(lineno) +
                       ": expected 'person_id cloth_id'");
    }
    if (mode == PairMode::kPaired && person != cloth) {
      throw ModeViolationError(origin + ":" + std::to_string(lineno) + ": mixed pair " +
                               person + " " + cloth + " in a paired list");
    }
    list.entries.emplace_back(std::move(person), std::move(cloth));
  }
  if (mode == PairMode::kUnpaired && !list.entries.empty()) {
    bool mixed = false;
    for (const auto& [p, c] : list.entries) mixed = mixed || p != c;
    if (!mixed) throw ModeViolationError(origin + ": unpaired list has no mixed pair");
  }
  return list;
}

inline PairList load_dataset_index(const fs::path& root, Split split, PairMode mode) {
  const DatasetPaths paths{root, split};
  if (!fs::is_directory(root)) throw LayoutError("missing directory " + root.string());
  for (auto sub : kModalityDirs) {
    const fs::path d = paths.split_dir() / sub;
    if (!fs::is_directory(d)) throw LayoutError("missing directory " + d.string());
  }
  const fs::path pf = paths.pairs(mode);
  std::ifstream in(pf);
  if (!in) throw LayoutError("missing pairs file " + pf.string());
  PairList list = parse_pairs(in, mode, pf.string());
  for (const auto& [person, cloth] : list.entries) {
    for (const auto& f : {paths.image(person), paths.parse(person), paths.pose(person)}) {
      if (!fs::exists(f)) throw IndexError("dangling id " + person + " (" + f.string() + ")");
    }
    for (const auto& f : {paths.cloth(cloth), paths.cloth_mask(cloth)}) {
      if (!fs::exists(f)) throw IndexError("dangling id " + cloth + " (" + f.string() + ")");
    }
  }
  return list;
}

struct LoadOptions {
  // Threshold anti-aliased masks at 0.5; when off, non-binary masks are an error.
  bool binarize_mask = true;
};

inline LabelRaster to_binary_mask(const LabelRaster& raw, bool binarize, const std::string& id) {
  LabelRaster m(1, raw.height(), raw.width());
  for (std::size_t n = 0; n < raw.data().size(); ++n) {
    const std::uint8_t v = raw.data()[n];
    if (binarize) {
      m.data()[n] = v / 255.0 >= 0.5 ? 1 : 0;
    } else if (v == 0 || v == 255) {
      m.data()[n] = v == 255 ? 1 : 0;
    } else {
      throw ConsistencyError("cloth mask " + id + " is not binary (binarization disabled)");
    }
  }
  return m;
}

inline Sample load_sample(const fs::path& root, Split split, const std::string& person_id,
                          const std::string& cloth_id, const LoadOptions& opts = {}) {
  const DatasetPaths paths{root, split};
  Sample s;
  s.sample_id = person_id;
  s.cloth_id = cloth_id;
  s.person_image = read_png_rgb(paths.image(person_id));
  s.cloth_image = read_png_rgb(paths.cloth(cloth_id));
  s.cloth_mask = to_binary_mask(read_png_gray(paths.cloth_mask(cloth_id)), opts.binarize_mask,
                                cloth_id);
  s.parse.labels = read_png_gray(paths.parse(person_id));
  s.parse.palette = load_palette(paths.palette());
  s.keypoints = load_keypoints(paths.pose(person_id));
  s.validate();
  return s;
}

// Writes the person-side modalities under sample_id and the garment side
// under cloth_id. Masks are stored as 0/255.
inline void save_sample(const fs::path& root, Split split, const Sample& s) {
  const DatasetPaths paths{root, split};
  write_png_rgb(paths.image(s.sample_id), s.person_image);
  write_png_gray(paths.parse(s.sample_id), s.parse.labels);
  save_keypoints(paths.pose(s.sample_id), s.keypoints);
  write_png_rgb(paths.cloth(s.cloth_id), s.cloth_image);
  LabelRaster m = s.cloth_mask;
  for (auto& v : m.data()) v = v ? 255 : 0;
  write_png_gray(paths.cloth_mask(s.cloth_id), m);
}

inline void write_pairs(const fs::path& path, const PairList& list) {
  ensure_parent(path);
  std::ofstream out(path);
  for (const auto& [p, c] : list.entries) out << p << " " << c << "\n";
}

// Loads every record referenced by the available pair files; returns the
// number of samples checked.
inline std::size_t validate_dataset(const fs::path& root, const LoadOptions& opts = {}) {
  std::size_t checked = 0;
  bool any = false;
  for (Split split : {Split::kTrain, Split::kTest}) {
    for (PairMode mode : {PairMode::kPaired, PairMode::kUnpaired}) {
      if (!fs::exists(DatasetPaths{root, split}.pairs(mode))) continue;
      any = true;
      const PairList list = load_dataset_index(root, split, mode);
      for (const auto& [p, c] : list.entries) {
        load_sample(root, split, p, c, opts);
        ++checked;
      }
    }
  }
  if (!any) throw LayoutError("no pairs files under " + root.string());
  return checked;
}

}  // namespace tryon
